//! Sum-of-exponentials approximation of the power kernel `x^(-beta)`.
//!
//! The kernel is written as a Laplace integral
//! `x^(-beta) = 1/Gamma(beta) * int_0^inf t^(beta-1) exp(-x t) dt`
//! and discretised by Gauss-Legendre rules on dyadic panels `[2^j, 2^(j+1)]`.
//! Panel orders are picked adaptively against a high-order reference, and terms
//! whose total contribution on the window is below a quarter of the tolerance are
//! dropped.

use crate::special::{gamma, Neumaier};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

const J_BUDGET: i32 = 80;
const REFERENCE_ORDER: usize = 64;
const MAX_PANEL_ORDER: usize = 48;
const SAMPLE_POINTS: usize = 240;
pub const VERIFY_POINTS: usize = 10_000;

/// Pointwise tolerance `tau(x) = max(abs, rel * x^(-beta))`.
///
/// With `rel = 0` this is the plain absolute tolerance. A positive `rel` keeps the
/// construction feasible in double precision when `x^(-beta)` is so large near the
/// lower cutoff that an absolute target falls below its rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl SoeTolerance {
    pub fn absolute(eps: f64) -> Self {
        Self { abs: eps, rel: 0.0 }
    }

    pub fn at(&self, beta: f64, x: f64) -> f64 {
        if self.rel > 0.0 {
            self.abs.max(self.rel * x.powf(-beta))
        } else {
            self.abs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeApproximation {
    beta: f64,
    eps: f64,
    rel_floor: f64,
    delta_x: f64,
    x_max: f64,
    exponents: Vec<f64>,
    weights: Vec<f64>,
    verified_error: f64,
}

struct Term {
    lambda: f64,
    theta: f64,
}

impl SoeApproximation {
    /// Builds an approximation with sup-error at most `eps` on `[delta_x, x_max]`.
    pub fn build(beta: f64, eps: f64, delta_x: f64, x_max: f64) -> Result<Self> {
        Self::build_with_tolerance(beta, SoeTolerance::absolute(eps), delta_x, x_max)
    }

    pub fn build_with_tolerance(
        beta: f64,
        tol: SoeTolerance,
        delta_x: f64,
        x_max: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::BetaOutOfRange(beta));
        }
        if !(tol.abs > 0.0 && tol.abs.is_finite()) {
            return Err(Error::InvalidTolerance(tol.abs));
        }
        if !(tol.rel >= 0.0 && tol.rel.is_finite()) {
            return Err(Error::InvalidTolerance(tol.rel));
        }
        if !(delta_x > 0.0 && x_max.is_finite() && delta_x < x_max) {
            return Err(Error::InvalidWindow { delta_x, x_max });
        }

        let mut last_ratio = f64::INFINITY;
        let mut safety = 1.0;
        for _ in 0..4 {
            let terms = construct(beta, tol, delta_x, x_max, safety)?;
            let mut soe = Self {
                beta,
                eps: tol.abs,
                rel_floor: tol.rel,
                delta_x,
                x_max,
                exponents: terms.iter().map(|t| t.lambda).collect(),
                weights: terms.iter().map(|t| t.theta).collect(),
                verified_error: 0.0,
            };
            let ratio = soe.worst_ratio(VERIFY_POINTS);
            soe.verify(VERIFY_POINTS);
            if ratio <= 1.0 {
                return Ok(soe);
            }
            last_ratio = ratio;
            safety *= 0.125;
        }
        Err(Error::SoeBudgetExhausted {
            achieved: last_ratio * tol.abs,
            target: tol.abs,
        })
    }

    /// Wraps explicit terms. The recorded tolerance is the measured sup-error.
    pub fn from_terms(
        beta: f64,
        delta_x: f64,
        x_max: f64,
        exponents: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::BetaOutOfRange(beta));
        }
        if !(delta_x > 0.0 && x_max.is_finite() && delta_x < x_max) {
            return Err(Error::InvalidWindow { delta_x, x_max });
        }
        if exponents.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: exponents.len(),
                got: weights.len(),
            });
        }
        let positive = |v: &f64| *v > 0.0 && v.is_finite();
        if exponents.is_empty() || !exponents.iter().all(positive) || !weights.iter().all(positive)
        {
            return Err(Error::InvalidSoeTerms);
        }
        let mut pairs: Vec<(f64, f64)> = exponents.into_iter().zip(weights).collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSoeTerms);
        }
        let mut soe = Self {
            beta,
            eps: 0.0,
            rel_floor: 0.0,
            delta_x,
            x_max,
            exponents: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            verified_error: 0.0,
        };
        soe.eps = soe.verify(VERIFY_POINTS);
        Ok(soe)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn rel_floor(&self) -> f64 {
        self.rel_floor
    }

    pub fn tolerance(&self) -> SoeTolerance {
        SoeTolerance {
            abs: self.eps,
            rel: self.rel_floor,
        }
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn verified_error(&self) -> f64 {
        self.verified_error
    }

    /// `sum_s theta_s exp(-lambda_s x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::NonPositiveArgument(x));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let mut sum = Neumaier::default();
        for (&lambda, &theta) in self.exponents.iter().zip(&self.weights) {
            // Carry the rounding error of lambda*x into the exponential.
            let p = lambda * x;
            let e = lambda.mul_add(x, -p);
            sum.add(theta * (-p).exp() * (1.0 - e));
        }
        sum.value()
    }

    /// Maximum of `|x^(-beta) - soe(x)|` over `samples` geometric points of the window.
    /// The result is stored as the verified error.
    pub fn verify(&mut self, samples: usize) -> f64 {
        let grid = geometric_grid(self.delta_x, self.x_max, samples.max(2));
        let err = grid
            .iter()
            .map(|&x| (x.powf(-self.beta) - self.eval_unchecked(x)).abs())
            .fold(0.0, f64::max);
        self.verified_error = err;
        err
    }

    /// Largest pointwise error measured in units of the construction tolerance.
    pub fn worst_ratio(&self, samples: usize) -> f64 {
        let tol = self.tolerance();
        geometric_grid(self.delta_x, self.x_max, samples.max(2))
            .iter()
            .map(|&x| (x.powf(-self.beta) - self.eval_unchecked(x)).abs() / tol.at(self.beta, x))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite floats serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|k| lo * (ratio * k as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// Upper bound for `1/Gamma(beta) int_T^inf t^(beta-1) e^(-x t) dt` when `x T > 2`.
fn upper_tail_bound(beta: f64, gamma_beta: f64, x: f64, t: f64) -> f64 {
    let z = x * t;
    let factor = if beta <= 1.0 {
        1.0
    } else {
        1.0 / (1.0 - (beta - 1.0) / z)
    };
    z.powf(beta - 1.0) * (-z).exp() * factor * x.powf(-beta) / gamma_beta
}

fn construct(
    beta: f64,
    tol: SoeTolerance,
    delta_x: f64,
    x_max: f64,
    safety: f64,
) -> Result<Vec<Term>> {
    let g = gamma(beta);
    let tau = |x: f64| tol.at(beta, x) * safety;
    let budget = |achieved: f64, target: f64| Error::SoeBudgetExhausted { achieved, target };

    // The dropped head [0, 2^j_min] contributes at most T^beta / (beta Gamma(beta)).
    let head_target = tau(x_max) / 8.0;
    let mut j_min = ((beta * g * head_target).ln() / beta / std::f64::consts::LN_2).floor() as i32;
    if j_min < -J_BUDGET {
        return Err(budget(
            2f64.powi(-J_BUDGET).powf(beta) / (beta * g),
            head_target,
        ));
    }
    j_min = j_min.min(J_BUDGET);

    let tail_target = tau(delta_x) / 8.0;
    let mut j_max = j_min;
    loop {
        let t = 2f64.powi(j_max + 1);
        if delta_x * t > 2.0 * beta + 2.0 && upper_tail_bound(beta, g, delta_x, t) <= tail_target {
            break;
        }
        j_max += 1;
        if j_max >= J_BUDGET {
            let t = 2f64.powi(J_BUDGET);
            return Err(budget(upper_tail_bound(beta, g, delta_x, t), tail_target));
        }
    }

    let samples = geometric_grid(delta_x, x_max, SAMPLE_POINTS);
    let taus: Vec<f64> = samples.iter().map(|&x| tau(x)).collect();
    let panels = (j_max - j_min + 1) as f64;
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..=MAX_PANEL_ORDER.max(REFERENCE_ORDER))
        .map(|n| {
            if n == 0 {
                (vec![], vec![])
            } else {
                gauss_legendre(n)
            }
        })
        .collect();

    let panel_terms = |j: i32, n: usize| -> Vec<Term> {
        let lo = 2f64.powi(j);
        let half = 0.5 * lo;
        let mid = 1.5 * lo;
        let (nodes, weights) = &rules[n];
        nodes
            .iter()
            .zip(weights)
            .map(|(&s, &w)| {
                let t = mid + half * s;
                Term {
                    lambda: t,
                    theta: w * half * t.powf(beta - 1.0) / g,
                }
            })
            .collect()
    };
    let panel_values = |terms: &[Term]| -> Vec<f64> {
        samples
            .iter()
            .map(|&x| terms.iter().map(|t| t.theta * (-t.lambda * x).exp()).sum())
            .collect()
    };

    let mut all = Vec::new();
    for j in j_min..=j_max {
        let reference = panel_values(&panel_terms(j, REFERENCE_ORDER));
        let mut chosen = None;
        for n in 1..=MAX_PANEL_ORDER {
            let terms = panel_terms(j, n);
            let values = panel_values(&terms);
            let ok = values
                .iter()
                .zip(&reference)
                .zip(&taus)
                .all(|((v, r), tau)| (v - r).abs() <= tau / (4.0 * panels));
            if ok {
                chosen = Some(terms);
                break;
            }
        }
        all.extend(chosen.unwrap_or_else(|| panel_terms(j, REFERENCE_ORDER)));
    }

    // Drop terms whose summed normalised contribution stays within a quarter of tau.
    let mut scored: Vec<(f64, usize)> = all
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let worst = samples
                .iter()
                .zip(&taus)
                .map(|(&x, tau)| t.theta * (-t.lambda * x).exp() / tau)
                .fold(0.0, f64::max);
            (worst, k)
        })
        .collect();
    scored.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    let mut keep = vec![true; all.len()];
    let mut dropped = 0.0;
    for &(score, k) in &scored {
        if dropped + score > 0.25 {
            break;
        }
        dropped += score;
        keep[k] = false;
    }
    let mut kept: Vec<Term> = all
        .into_iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(t))
        .collect();
    kept.sort_by(|p, q| p.lambda.total_cmp(&q.lambda));
    Ok(kept)
}
