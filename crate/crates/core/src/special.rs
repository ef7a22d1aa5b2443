//! Gamma function accurate to a few ulps for moderate positive arguments.
//!
//! Evaluated directly from `Gamma(x) = int_0^inf t^(x-1) e^(-t) dt` with
//! Gauss-Legendre rules on dyadic panels and compensated summation. The SOE
//! normalisation needs `1/Gamma(beta)` to near machine precision, which common
//! Lanczos fits (relative error around 1e-15) do not deliver.

use std::sync::OnceLock;

use crate::quadrature::gauss_legendre;

const HEAD_EXP: i32 = -60;
const TAIL_EXP: i32 = 7;
const ORDER: usize = 48;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// `Gamma(x)` for `x > 0`. Arguments above 3 are reduced by the recurrence.
pub fn gamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "gamma requires a positive finite argument"
    );
    if x > 3.0 {
        return (x - 1.0) * gamma(x - 1.0);
    }
    let mut sum = Neumaier::default();
    // Head: int_0^T t^(x-1) e^(-t) dt = T^x/x - T^(x+1)/(x+1) + O(T^(x+2)).
    let t0 = 2f64.powi(HEAD_EXP);
    sum.add(t0.powf(x) / x);
    sum.add(-t0.powf(x + 1.0) / (x + 1.0));
    let (nodes, weights) = rule();
    for j in HEAD_EXP..TAIL_EXP {
        let lo = 2f64.powi(j);
        let half = 0.5 * lo;
        let mid = 1.5 * lo;
        for (&s, &w) in nodes.iter().zip(weights) {
            let t = mid + half * s;
            sum.add(w * half * t.powf(x - 1.0) * (-t).exp());
        }
    }
    sum.value()
}

#[derive(Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
