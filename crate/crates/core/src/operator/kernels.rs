//! Cancellation-free scalar kernels shared by the operator assembly routines.

/// Below this argument the exponential integrals are summed from their Taylor series.
pub(crate) const SERIES_CUTOFF: f64 = 1.0;
const SERIES_TERMS: usize = 22;

/// `(x + e^(-x) - 1) / x^2`: hat weight of the cell node nearer the collocation point.
pub(crate) fn phi_near(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // sum_{n>=2} (-1)^n x^(n-2) / n!
        let mut term = 0.5;
        let mut sum = 0.0;
        for n in 2..SERIES_TERMS + 2 {
            sum += term;
            term *= -x / (n + 1) as f64;
        }
        sum
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// `(1 - e^(-x) (1 + x)) / x^2`: hat weight of the cell node farther from it.
pub(crate) fn phi_far(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // sum_{n>=2} (-1)^n (n-1) x^(n-2) / n!
        let mut power = 0.5;
        let mut sum = 0.0;
        for n in 2..SERIES_TERMS + 2 {
            sum += (n - 1) as f64 * power;
            power *= -x / (n + 1) as f64;
        }
        sum
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

/// `(1 - e^(-x)) / x`.
pub(crate) fn phi_flat(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(d + delta)^p - d^p` for `d >= 0`, `d + delta >= 0`, without cancellation.
pub(crate) fn pow_step(d: f64, delta: f64, p: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else if d == 0.0 {
        delta.powf(p)
    } else if d + delta == 0.0 {
        -d.powf(p)
    } else {
        d.powf(p) * (p * (delta / d).ln_1p()).exp_m1()
    }
}

/// `int_d^{d+h} t^(-alpha) dt` for `d > 0`, `h > 0`.
pub(crate) fn kernel_integral(d: f64, h: f64, alpha: f64, is_one: bool) -> f64 {
    if is_one {
        (h / d).ln_1p()
    } else {
        let p = 1.0 - alpha;
        pow_step(d, h, p) / p
    }
}
