//! Collocation operators for the integral fractional Laplacian.
//!
//! [`FastOperator`] applies the original or modified scheme matrix-free: the
//! tridiagonal near field is evaluated directly and the two nonlocal tails are
//! accumulated by SOE recurrences, one per exponential, in `O(N * Ne)` work.
//! The `direct` routines give the exact (non-SOE) entries used as oracle and as
//! preconditioner source, and `audit` checks sign and dominance structure.

mod audit;
mod coefficients;
mod direct;
mod kernels;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use audit::{audit_solvability, g_alpha, AuditReport};
pub use coefficients::CoefficientTables;
pub use direct::{assemble_direct_matrix, direct_entry, exact_entry, exact_matrix, xi};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LinearOperator};
use crate::mesh::GradedMesh;
use crate::soe::{SoeApproximation, SoeTolerance};
use crate::special::gamma;
use coefficients::LANES;
use kernels::pow_step;

/// Largest system size for which dense matrices are formed.
pub const AUDIT_CAP: usize = 4096;

/// Relative floor of the SOE tolerance used by [`FastOperator::new`].
///
/// On strongly graded meshes `h_min^(-beta)` can exceed `1e20`, where an absolute
/// SOE tolerance of `1e-8` is below double-precision resolution.
pub const SOE_REL_FLOOR: f64 = 1e-13;

/// Systems with at least this many unknowns spread SOE chunks over the rayon pool.
const PARALLEL_MIN_N: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `alpha < 1`: kernel `x^(-1-alpha)` applied to the interpolant.
    Sub,
    /// `alpha = 1`: logarithmic local terms.
    One,
    /// `alpha > 1`: kernel `x^(-alpha)` applied to the interpolant's derivative.
    Super,
}

impl Regime {
    pub fn of(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(if (alpha - 1.0).abs() < 1e-12 {
            Regime::One
        } else if alpha < 1.0 {
            Regime::Sub
        } else {
            Regime::Super
        })
    }

    /// Exponent of the kernel that the SOE must approximate.
    pub fn soe_beta(self, alpha: f64) -> f64 {
        match self {
            Regime::Sub => 1.0 + alpha,
            Regime::One => 1.0,
            Regime::Super => alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Original,
    Modified,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Original => "original",
            Scheme::Modified => "modified",
        })
    }
}

/// `C_alpha = alpha 2^(alpha-1) Gamma((1+alpha)/2) / (sqrt(pi) Gamma(1-alpha/2))`.
pub fn normalization_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(alpha * 2f64.powf(alpha - 1.0) * gamma(0.5 * (1.0 + alpha))
        / (std::f64::consts::PI.sqrt() * gamma(1.0 - 0.5 * alpha)))
}

/// `eta_i` of the modified local approximation, `1 <= i <= N-1`.
fn eta(mesh: &GradedMesh, alpha: f64, regime: Regime, i: usize) -> f64 {
    let (hl, hr) = (mesh.h(i), mesh.h(i + 1));
    match regime {
        Regime::One => -((hr - hl) / hl).ln_1p(),
        _ => {
            let p = 1.0 - alpha;
            -pow_step(hl, hr - hl, p) / p
        }
    }
}

/// Three-point first-derivative stencil on a nonuniform grid.
fn derivative_stencil(hl: f64, hr: f64) -> [f64; 3] {
    [
        -hr / (hl * (hl + hr)),
        (hr - hl) / (hl * hr),
        hl / (hr * (hl + hr)),
    ]
}

/// Tridiagonal `[lower, diag, upper]` of the original scheme's local bracket for row `i`.
fn original_near(mesh: &GradedMesh, alpha: f64, regime: Regime, i: usize) -> [f64; 3] {
    let (hl, hr) = (mesh.h(i), mesh.h(i + 1));
    match regime {
        Regime::One => {
            let l = (1.0 + hl.ln()) / hl;
            let r = (1.0 + hr.ln()) / hr;
            [-l, l + r, -r]
        }
        Regime::Sub => {
            let (pl, pr) = (hl.powf(-alpha), hr.powf(-alpha));
            let c = 1.0 - alpha;
            [-pl / c, (pl + pr) / (alpha * c), -pr / c]
        }
        Regime::Super => {
            let (pl, pr) = (hl.powf(-alpha), hr.powf(-alpha));
            let c = alpha * (1.0 - alpha);
            [-pl / c, (pl + pr) / c, -pr / c]
        }
    }
}

/// Tridiagonal of the modified scheme's near field: self terms plus `eta_i D2`.
fn modified_near(mesh: &GradedMesh, alpha: f64, regime: Regime, i: usize) -> [f64; 3] {
    let (hl, hr) = (mesh.h(i), mesh.h(i + 1));
    let (pl, pr) = (hl.powf(-alpha) / alpha, hr.powf(-alpha) / alpha);
    let e = eta(mesh, alpha, regime, i);
    let d = derivative_stencil(hl, hr);
    match regime {
        Regime::Sub => [d[0] * e, pl + pr + d[1] * e, d[2] * e],
        Regime::One | Regime::Super => [-pl + d[0] * e, pl + pr + d[1] * e, -pr + d[2] * e],
    }
}

/// Matrix-free fast collocation operator.
#[derive(Debug, Clone)]
pub struct FastOperator {
    mesh: GradedMesh,
    alpha: f64,
    regime: Regime,
    scheme: Scheme,
    c_alpha: f64,
    soe: SoeApproximation,
    coeffs: CoefficientTables,
    eta: Vec<f64>,
    near: Vec<[f64; 3]>,
}

impl FastOperator {
    /// Builds the SOE on `[h_min, b - a]` with absolute tolerance `eps` and
    /// precomputes all recurrence coefficients.
    pub fn new(mesh: &GradedMesh, alpha: f64, scheme: Scheme, eps: f64) -> Result<Self> {
        let regime = Regime::of(alpha)?;
        let tol = SoeTolerance {
            abs: eps,
            rel: SOE_REL_FLOOR,
        };
        let soe = SoeApproximation::build_with_tolerance(
            regime.soe_beta(alpha),
            tol,
            mesh.stats().h_min,
            mesh.length(),
        )?;
        Self::with_soe(mesh, alpha, scheme, soe)
    }

    pub fn with_soe(
        mesh: &GradedMesh,
        alpha: f64,
        scheme: Scheme,
        soe: SoeApproximation,
    ) -> Result<Self> {
        let regime = Regime::of(alpha)?;
        let expected = regime.soe_beta(alpha);
        if (soe.beta() - expected).abs() > 1e-12 {
            return Err(Error::SoeExponentMismatch {
                beta: soe.beta(),
                expected,
            });
        }
        let coeffs = CoefficientTables::new(mesh, &soe, alpha)?;
        let n = mesh.n();
        let eta: Vec<f64> = (1..n).map(|i| eta(mesh, alpha, regime, i)).collect();
        let near = (1..n)
            .map(|i| match scheme {
                Scheme::Original => original_near(mesh, alpha, regime, i),
                Scheme::Modified => modified_near(mesh, alpha, regime, i),
            })
            .collect();
        Ok(Self {
            mesh: mesh.clone(),
            alpha,
            regime,
            scheme,
            c_alpha: normalization_constant(alpha)?,
            soe,
            coeffs,
            eta,
            near,
        })
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn soe(&self) -> &SoeApproximation {
        &self.soe
    }

    pub fn coefficients(&self) -> &CoefficientTables {
        &self.coeffs
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Number of interior unknowns `N - 1`.
    pub fn size(&self) -> usize {
        self.mesh.n() - 1
    }

    /// The original scheme with `alpha >= 1` has no solvability theory behind it.
    pub fn unsupported_theory(&self) -> bool {
        self.scheme == Scheme::Original && self.regime != Regime::Sub
    }

    /// Near-field tridiagonal `[lower, diag, upper]` of row `i` (1-based), unscaled.
    pub fn near_field(&self, i: usize) -> [f64; 3] {
        self.near[i - 1]
    }

    fn tridiagonal(&self, rows: impl Fn(usize) -> [f64; 3], v: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(v.len(), m);
        (0..m)
            .map(|k| {
                let [l, d, u] = rows(k + 1);
                let left = if k > 0 { l * v[k - 1] } else { 0.0 };
                let right = if k + 1 < m { u * v[k + 1] } else { 0.0 };
                left + d * v[k] + right
            })
            .collect()
    }

    /// Local bracket of the original scheme (including the self terms of the
    /// nonlocal tails), unscaled by `C_alpha`.
    pub fn local_part_original(&self, v: &[f64]) -> Vec<f64> {
        self.tridiagonal(|i| original_near(&self.mesh, self.alpha, self.regime, i), v)
    }

    /// `eta_i [D2 v]_i` with the three-point nonuniform derivative stencil, unscaled.
    pub fn local_part_modified(&self, v: &[f64]) -> Vec<f64> {
        self.tridiagonal(
            |i| {
                let d = derivative_stencil(self.mesh.h(i), self.mesh.h(i + 1));
                let e = self.eta[i - 1];
                [d[0] * e, d[1] * e, d[2] * e]
            },
            v,
        )
    }

    /// Materialised left sums `S^L_{i,s}` (rows `i = 1..N-1`), following the recursion
    /// with `mu`, `nu` as stored in the coefficient tables.
    pub fn sweep_left(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let m = self.size();
        assert_eq!(v.len(), m);
        let ne = self.coeffs.ne();
        let val = |j: usize| if j == 0 || j > m { 0.0 } else { v[j - 1] };
        let mut out = vec![vec![0.0; ne]; m];
        for i in 2..=m {
            for s in 0..ne {
                let prev = out[i - 2][s];
                let w = self.coeffs.omega(i, s);
                let mu = self.coeffs.mu_left(i, s);
                out[i - 1][s] = match self.coeffs.nu_left(i, s) {
                    Some(nu) => w * prev + mu * val(i - 1) + nu * val(i - 2),
                    None => w * prev + mu * (val(i - 1) - val(i - 2)),
                };
            }
        }
        out
    }

    /// Materialised right sums `S^R_{i,s}` (rows `i = 1..N-1`).
    pub fn sweep_right(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let m = self.size();
        assert_eq!(v.len(), m);
        let ne = self.coeffs.ne();
        let val = |j: usize| if j == 0 || j > m { 0.0 } else { v[j - 1] };
        let mut out = vec![vec![0.0; ne]; m];
        for i in (1..m).rev() {
            for s in 0..ne {
                let prev = out[i][s];
                let w = self.coeffs.omega(i + 1, s);
                let mu = self.coeffs.mu_right(i, s);
                out[i - 1][s] = match self.coeffs.nu_right(i, s) {
                    Some(nu) => w * prev + mu * val(i + 1) + nu * val(i + 2),
                    None => w * prev + mu * (val(i + 1) - val(i + 2)),
                };
            }
        }
        out
    }

    /// Sum over exponentials of `theta_s (S^L + S^R)` for one block of lanes,
    /// added into `acc` in a fixed order.
    fn nonlocal_block(&self, block: usize, v: &[f64], acc: &mut [f64]) {
        let m = self.size();
        let c = &self.coeffs;
        let off = block * LANES;
        let theta: [f64; LANES] = c.theta_padded()[off..off + LANES].try_into().unwrap();
        let omega = c.omega_raw();
        let first = c.first_raw();
        let second = c.second_raw();
        let lanes = |raw: &[f64], step: usize| -> [f64; LANES] {
            let k = c.row(step) + off;
            raw[k..k + LANES].try_into().unwrap()
        };
        let val = |j: usize| if j == 0 || j > m { 0.0 } else { v[j - 1] };
        let sub = self.regime == Regime::Sub;

        let mut state = [0.0f64; LANES];
        for i in 2..=m {
            let w = lanes(omega, i);
            let a = lanes(first, i - 1);
            let (near, far) = (val(i - 1), val(i - 2));
            let mut total = 0.0;
            if sub {
                let b = lanes(second, i - 1);
                for l in 0..LANES {
                    state[l] = w[l] * (state[l] + a[l] * near + b[l] * far);
                    total += theta[l] * state[l];
                }
            } else {
                let diff = near - far;
                for l in 0..LANES {
                    state[l] = w[l] * (state[l] + a[l] * diff);
                    total += theta[l] * state[l];
                }
            }
            acc[i - 1] += total;
        }

        let mut state = [0.0f64; LANES];
        for i in (1..m).rev() {
            let w = lanes(omega, i + 1);
            let a = lanes(first, i + 2);
            let (near, far) = (val(i + 1), val(i + 2));
            let mut total = 0.0;
            if sub {
                let b = lanes(second, i + 2);
                for l in 0..LANES {
                    state[l] = w[l] * (state[l] + a[l] * near + b[l] * far);
                    total += theta[l] * state[l];
                }
            } else {
                let diff = near - far;
                for l in 0..LANES {
                    state[l] = w[l] * (state[l] + a[l] * diff);
                    total += theta[l] * state[l];
                }
            }
            acc[i - 1] += total;
        }
    }

    /// `sum_s theta_s (S^L_{i,s} + S^R_{i,s})` for every row.
    ///
    /// Blocks of exponentials may run on different threads; their partial sums are
    /// combined in block order, so the result does not depend on the thread count.
    pub fn nonlocal_sums(&self, v: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(v.len(), m);
        let blocks = self.coeffs.stride() / LANES;
        if blocks <= 1 || m < PARALLEL_MIN_N {
            let mut acc = vec![0.0; m];
            let mut part = vec![0.0; m];
            for b in 0..blocks {
                part.iter_mut().for_each(|p| *p = 0.0);
                self.nonlocal_block(b, v, &mut part);
                acc.iter_mut().zip(&part).for_each(|(a, p)| *a += p);
            }
            return acc;
        }
        let parts: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut part = vec![0.0; m];
                self.nonlocal_block(b, v, &mut part);
                part
            })
            .collect();
        let mut acc = vec![0.0; m];
        for part in &parts {
            acc.iter_mut().zip(part).for_each(|(a, p)| *a += p);
        }
        acc
    }

    /// Operator without the `C_alpha` factor.
    pub fn apply_unscaled(&self, v: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(v.len(), m);
        let sums = self.nonlocal_sums(v);
        let weight = match self.regime {
            Regime::Sub => -1.0,
            Regime::One | Regime::Super => 1.0 / self.alpha,
        };
        (0..m)
            .map(|k| {
                let [l, d, u] = self.near[k];
                let left = if k > 0 { l * v[k - 1] } else { 0.0 };
                let right = if k + 1 < m { u * v[k + 1] } else { 0.0 };
                (left + d * v[k] + right) + weight * sums[k]
            })
            .collect()
    }

    /// `C_alpha` times the collocation operator applied to interior values `v`.
    pub fn apply_fast(&self, v: &[f64]) -> Vec<f64> {
        let mut y = self.apply_unscaled(v);
        y.iter_mut().for_each(|y| *y *= self.c_alpha);
        y
    }

    fn check_audit_size(&self) -> Result<()> {
        let m = self.size();
        if m > AUDIT_CAP {
            return Err(Error::AuditCapExceeded {
                n: m,
                cap: AUDIT_CAP,
            });
        }
        Ok(())
    }

    /// Dense matrix whose column `j` is `apply_unscaled(e_j)`.
    pub fn materialize_unscaled(&self) -> Result<DenseMatrix> {
        self.check_audit_size()?;
        let m = self.size();
        let mut out = DenseMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = self.apply_unscaled(&e);
            e[j] = 0.0;
            for (i, c) in col.into_iter().enumerate() {
                out[(i, j)] = c;
            }
        }
        Ok(out)
    }

    /// Dense matrix whose column `j` is `apply_fast(e_j)`.
    pub fn materialize_fast_matrix(&self) -> Result<DenseMatrix> {
        Ok(self.materialize_unscaled()?.scaled(self.c_alpha))
    }

    /// Audits the unscaled materialised matrix of this operator.
    pub fn audit(&self) -> Result<AuditReport> {
        let m = self.materialize_unscaled()?;
        audit_solvability(&m, &self.mesh, self.alpha, self.soe.eps())
    }
}

impl LinearOperator for FastOperator {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_fast(x));
    }
}
