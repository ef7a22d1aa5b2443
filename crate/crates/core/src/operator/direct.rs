use super::kernels::{kernel_integral, pow_step};
use super::{modified_near, original_near, Regime, Scheme, AUDIT_CAP};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::GradedMesh;

fn check_sub(alpha: f64) -> Result<()> {
    match Regime::of(alpha)? {
        Regime::Sub => Ok(()),
        _ => Err(Error::DirectRegime(alpha)),
    }
}

fn check_size(mesh: &GradedMesh) -> Result<()> {
    let m = mesh.n() - 1;
    if m > AUDIT_CAP {
        return Err(Error::AuditCapExceeded {
            n: m,
            cap: AUDIT_CAP,
        });
    }
    Ok(())
}

/// Entry `(i, j)` (1-based) of the unscaled direct collocation matrix for `alpha < 1`.
///
/// Differences of powers are formed with `pow_step`, so far-field entries keep full
/// relative accuracy even when neighbouring distances agree to many digits.
pub fn direct_entry(mesh: &GradedMesh, alpha: f64, i: usize, j: usize) -> f64 {
    let p = 1.0 - alpha;
    let scale = alpha * p;
    if i == j {
        return (mesh.h(i).powf(-alpha) + mesh.h(i + 1).powf(-alpha)) / scale;
    }
    let d = mesh.distance(i, j);
    let (hj, hj1) = (mesh.h(j), mesh.h(j + 1));
    let sum = if j < i {
        pow_step(d, hj, p) / hj + pow_step(d, -hj1, p) / hj1
    } else {
        pow_step(d, -hj, p) / hj + pow_step(d, hj1, p) / hj1
    };
    sum / scale
}

/// Dense unscaled direct collocation matrix, `alpha` in `(0, 1)`.
pub fn assemble_direct_matrix(mesh: &GradedMesh, alpha: f64) -> Result<DenseMatrix> {
    check_sub(alpha)?;
    check_size(mesh)?;
    let m = mesh.n() - 1;
    let mut a = DenseMatrix::zeros(m, m);
    for i in 1..=m {
        for j in 1..=m {
            a[(i - 1, j - 1)] = direct_entry(mesh, alpha, i, j);
        }
    }
    Ok(a)
}

/// Entry `(i, j)` of the scheme with the nonlocal tails integrated exactly.
///
/// Uses `-int phi_j(y) |x_i - y|^(-1-alpha) dy = (1/alpha) int phi_j'(y) ... |x_i-y|^(-alpha) dy`
/// so one formula covers every regime. For `alpha < 1` and the original scheme this
/// reproduces [`direct_entry`].
pub fn exact_entry(mesh: &GradedMesh, alpha: f64, scheme: Scheme, i: usize, j: usize) -> f64 {
    let regime = Regime::of(alpha).expect("alpha validated by caller");
    let one = regime == Regime::One;
    let k = |d: f64, h: f64| kernel_integral(d, h, alpha, one);
    let near = || match scheme {
        Scheme::Original => original_near(mesh, alpha, regime, i),
        Scheme::Modified => modified_near(mesh, alpha, regime, i),
    };
    // The near-field rows already hold the self terms h^(-alpha)/alpha on the diagonal
    // (and, in the derivative regimes, their off-diagonal counterparts). The remaining
    // contributions come from the partial cells next to the neighbours.
    let self_terms_off_diag = regime == Regime::Sub;
    if j + 1 < i {
        let (hj, hj1) = (mesh.h(j), mesh.h(j + 1));
        (k(mesh.distance(i, j), hj) / hj - k(mesh.distance(i, j + 1), hj1) / hj1) / alpha
    } else if j > i + 1 {
        let (hj, hj1) = (mesh.h(j), mesh.h(j + 1));
        -(k(mesh.distance(i, j - 1), hj) / hj - k(mesh.distance(i, j), hj1) / hj1) / alpha
    } else if j + 1 == i {
        let (hi, hm) = (mesh.h(i), mesh.h(i - 1));
        let boundary = if self_terms_off_diag {
            -hi.powf(-alpha) / alpha
        } else {
            0.0
        };
        near()[0] + boundary + k(hi, hm) / hm / alpha
    } else if j == i + 1 {
        let (hr, hp) = (mesh.h(i + 1), mesh.h(i + 2));
        let boundary = if self_terms_off_diag {
            -hr.powf(-alpha) / alpha
        } else {
            0.0
        };
        near()[2] + boundary + k(hr, hp) / hp / alpha
    } else {
        near()[1]
    }
}

/// Dense matrix of [`exact_entry`], subject to the audit size cap.
pub fn exact_matrix(mesh: &GradedMesh, alpha: f64, scheme: Scheme) -> Result<DenseMatrix> {
    Regime::of(alpha)?;
    check_size(mesh)?;
    let m = mesh.n() - 1;
    let mut a = DenseMatrix::zeros(m, m);
    for i in 1..=m {
        for j in 1..=m {
            a[(i - 1, j - 1)] = exact_entry(mesh, alpha, scheme, i, j);
        }
    }
    Ok(a)
}

/// Row sum `Xi_i` of the direct matrix in closed form, `alpha < 1`.
pub fn xi(mesh: &GradedMesh, alpha: f64, i: usize) -> f64 {
    let p = 1.0 - alpha;
    let n = mesh.n();
    let left = pow_step(mesh.distance(i, 1), mesh.h(1), p) / mesh.h(1);
    let right = pow_step(mesh.distance(i, n - 1), mesh.h(n), p) / mesh.h(n);
    (left + right) / (alpha * p)
}
