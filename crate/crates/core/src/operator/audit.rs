use serde::{Deserialize, Serialize};

use super::direct::{direct_entry, xi};
use super::kernels::pow_step;
use super::Regime;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::GradedMesh;

/// Sign and dominance structure of a collocation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub size: usize,
    pub diag_all_positive: bool,
    pub offdiag_all_nonpositive: bool,
    /// `min_i (a_ii - sum_{j != i} |a_ij|)`.
    pub min_row_gap: f64,
    /// SOE tolerance the matrix was built with.
    pub eps: f64,
    /// `min{-2 a^d_ij / (h_j + h_{j+1}), Xi_i / (b - a)}`; only for `alpha < 1`.
    pub eps_threshold: Option<f64>,
    /// Row sums `Xi_i` of the direct matrix; only for `alpha < 1`.
    pub xi: Option<Vec<f64>>,
    pub pass: bool,
}

impl AuditReport {
    pub fn strictly_dominant(&self) -> bool {
        self.min_row_gap > 0.0
    }
}

impl std::fmt::Display for AuditReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "size: {}", self.size)?;
        writeln!(f, "diag_all_positive: {}", self.diag_all_positive)?;
        writeln!(
            f,
            "offdiag_all_nonpositive: {}",
            self.offdiag_all_nonpositive
        )?;
        writeln!(f, "min_row_gap: {:e}", self.min_row_gap)?;
        writeln!(f, "eps: {:e}", self.eps)?;
        match self.eps_threshold {
            Some(t) => writeln!(f, "eps_threshold: {t:e}")?,
            None => writeln!(f, "eps_threshold: n/a")?,
        }
        write!(f, "pass: {}", self.pass)
    }
}

/// Audits `m` for positive diagonal, nonpositive off-diagonal and strict row dominance.
///
/// For `alpha < 1` on a matching mesh the SOE threshold of the direct matrix is also
/// computed and `eps` must not exceed it.
pub fn audit_solvability(
    m: &DenseMatrix,
    mesh: &GradedMesh,
    alpha: f64,
    eps: f64,
) -> Result<AuditReport> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    let size = m.rows();
    let mut diag_all_positive = true;
    let mut offdiag_all_nonpositive = true;
    let mut min_row_gap = f64::INFINITY;
    for i in 0..size {
        let row = m.row(i);
        let mut off = 0.0;
        for (j, &a) in row.iter().enumerate() {
            if i == j {
                diag_all_positive &= a > 0.0;
            } else {
                offdiag_all_nonpositive &= a <= 0.0;
                off += a.abs();
            }
        }
        min_row_gap = min_row_gap.min(row[i] - off);
    }

    let direct = Regime::of(alpha)? == Regime::Sub && size + 1 == mesh.n();
    let (eps_threshold, xi_values) = if direct {
        let n = mesh.n();
        let xs: Vec<f64> = (1..n).map(|i| xi(mesh, alpha, i)).collect();
        let mut t = xs
            .iter()
            .fold(f64::INFINITY, |t, x| t.min(x / mesh.length()));
        for i in 1..n {
            for j in 1..n {
                if i != j {
                    let a = direct_entry(mesh, alpha, i, j);
                    t = t.min(-2.0 * a / (mesh.h(j) + mesh.h(j + 1)));
                }
            }
        }
        (Some(t), Some(xs))
    } else {
        (None, None)
    };

    let pass = diag_all_positive
        && offdiag_all_nonpositive
        && min_row_gap > 0.0
        && eps_threshold.is_none_or(|t| eps <= t);
    Ok(AuditReport {
        size,
        diag_all_positive,
        offdiag_all_nonpositive,
        min_row_gap,
        eps,
        eps_threshold,
        xi: xi_values,
        pass,
    })
}

/// Lower bound of `-2 a^d_ij / (h_j + h_{j+1})` on a uniform grid of `n` cells over
/// an interval of length `len`.
pub fn g_alpha(alpha: f64, n: usize, len: f64) -> f64 {
    let p = 1.0 - alpha;
    let h = len / n as f64;
    let m = (n - 2) as f64;
    // 2 m^p - (m-1)^p - (m+1)^p as a difference of two forward steps.
    let second = pow_step(m - 1.0, 1.0, p) - pow_step(m, 1.0, p);
    second / (alpha * p * h.powf(1.0 + alpha))
}
