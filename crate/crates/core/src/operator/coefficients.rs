use std::collections::HashMap;

use super::kernels::{phi_far, phi_flat, phi_near};
use super::Regime;
use crate::error::{Error, Result};
use crate::mesh::GradedMesh;
use crate::soe::SoeApproximation;

/// Lanes processed together by the streaming sweeps; tables are padded to a multiple.
pub(crate) const LANES: usize = 8;

/// Recurrence coefficients of the SOE sweeps.
///
/// Steps that are bit-identical share one row of the tables, so a uniform mesh costs
/// a single row. Per step class `c` and exponent `s` the tables hold
/// `omega = exp(-lambda_s h)`, and either the two hat-function weights
/// `h (x + e^-x - 1)/x^2`, `h (1 - e^-x (1 + x))/x^2` (regime sub) or the
/// derivative weight `(1 - e^-x)/x` (regimes one and super), where `x = lambda_s h`.
/// The recurrence weights `mu`, `nu` of a row are products of these with `omega`.
#[derive(Debug, Clone)]
pub struct CoefficientTables {
    regime: Regime,
    n: usize,
    ne: usize,
    stride: usize,
    class_of_step: Vec<u32>,
    omega: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    theta: Vec<f64>,
}

impl CoefficientTables {
    pub fn new(mesh: &GradedMesh, soe: &SoeApproximation, alpha: f64) -> Result<Self> {
        let regime = Regime::of(alpha)?;
        let stats = mesh.stats();
        if soe.delta_x() > stats.h_min || soe.x_max() < mesh.length() {
            return Err(Error::WindowDoesNotCover {
                delta_x: soe.delta_x(),
                x_max: soe.x_max(),
                need_min: stats.h_min,
                need_max: mesh.length(),
            });
        }
        let ne = soe.len();
        let stride = ne.div_ceil(LANES) * LANES;

        let mut class_of_step = Vec::with_capacity(mesh.n());
        let mut class_steps = Vec::new();
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        for &h in mesh.steps() {
            let id = *lookup.entry(h.to_bits()).or_insert_with(|| {
                class_steps.push(h);
                (class_steps.len() - 1) as u32
            });
            class_of_step.push(id);
        }

        let rows = class_steps.len();
        let mut omega = vec![0.0; rows * stride];
        let mut first = vec![0.0; rows * stride];
        let mut second = vec![0.0; rows * stride];
        for (c, &h) in class_steps.iter().enumerate() {
            for (s, &lambda) in soe.exponents().iter().enumerate() {
                let x = lambda * h;
                let k = c * stride + s;
                omega[k] = (-x).exp();
                match regime {
                    Regime::Sub => {
                        first[k] = h * phi_near(x);
                        second[k] = h * phi_far(x);
                    }
                    Regime::One | Regime::Super => first[k] = phi_flat(x),
                }
            }
        }
        let mut theta = soe.weights().to_vec();
        theta.resize(stride, 0.0);
        Ok(Self {
            regime,
            n: mesh.n(),
            ne,
            stride,
            class_of_step,
            omega,
            first,
            second,
            theta,
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Number of SOE terms.
    pub fn ne(&self) -> usize {
        self.ne
    }

    /// Number of distinct step classes stored.
    pub fn classes(&self) -> usize {
        self.omega.len() / self.stride.max(1)
    }

    #[inline]
    pub(crate) fn row(&self, step: usize) -> usize {
        self.class_of_step[step - 1] as usize * self.stride
    }

    pub(crate) fn stride(&self) -> usize {
        self.stride
    }

    pub(crate) fn omega_raw(&self) -> &[f64] {
        &self.omega
    }

    pub(crate) fn first_raw(&self) -> &[f64] {
        &self.first
    }

    pub(crate) fn second_raw(&self) -> &[f64] {
        &self.second
    }

    pub(crate) fn theta_padded(&self) -> &[f64] {
        &self.theta
    }

    /// `omega_{i,s} = exp(-lambda_s h_i)`, `1 <= i <= N`.
    pub fn omega(&self, i: usize, s: usize) -> f64 {
        self.omega[self.row(i) + s]
    }

    /// Left weight of `v_{i-1}` in the recurrence for row `i`, `2 <= i <= N-1`.
    pub fn mu_left(&self, i: usize, s: usize) -> f64 {
        self.omega(i, s) * self.first[self.row(i - 1) + s]
    }

    /// Left weight of `v_{i-2}`; `None` in the derivative regimes.
    pub fn nu_left(&self, i: usize, s: usize) -> Option<f64> {
        (self.regime == Regime::Sub).then(|| self.omega(i, s) * self.second[self.row(i - 1) + s])
    }

    /// Right weight of `v_{i+1}` for row `i`, `1 <= i <= N-2`.
    pub fn mu_right(&self, i: usize, s: usize) -> f64 {
        self.omega(i + 1, s) * self.first[self.row(i + 2) + s]
    }

    /// Right weight of `v_{i+2}`; `None` in the derivative regimes.
    pub fn nu_right(&self, i: usize, s: usize) -> Option<f64> {
        (self.regime == Regime::Sub)
            .then(|| self.omega(i + 1, s) * self.second[self.row(i + 2) + s])
    }

    /// Dense `[N x Ne]` copy of `omega` (rows indexed by step `1..=N`).
    pub fn omega_matrix(&self) -> Vec<Vec<f64>> {
        (1..=self.n)
            .map(|i| (0..self.ne).map(|s| self.omega(i, s)).collect())
            .collect()
    }
}
