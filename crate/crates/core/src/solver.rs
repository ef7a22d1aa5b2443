//! BiCGSTAB with an optional banded right preconditioner, and dense Gaussian
//! elimination used as a reference solver.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, DenseMatrix, LinearOperator};
use crate::mesh::GradedMesh;
use crate::operator::{direct_entry, exact_entry, Regime, Scheme};

/// Central band of a square matrix with `w` sub- and super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            data: vec![0.0; n * (2 * w + 1)],
        }
    }

    /// Copies the band of half-width `w` out of a dense matrix.
    pub fn from_dense(m: &DenseMatrix, w: usize) -> Self {
        let mut b = Self::zeros(m.rows(), w);
        for i in 0..m.rows() {
            for j in b.columns(i) {
                b.set(i, j, m[(i, j)]);
            }
        }
        b
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.w
    }

    pub fn columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.w)..(i + self.w + 1).min(self.n)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.w < i || j > i + self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.columns(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Smallest `|a_ii| - sum_{j != i} |a_ij|` and the row attaining it.
    pub fn dominance_gap(&self) -> (usize, f64) {
        let mut worst = (0, f64::INFINITY);
        for i in 0..self.n {
            let off: f64 = self
                .columns(i)
                .filter(|&j| j != i)
                .map(|j| self.get(i, j).abs())
                .sum();
            let gap = self.get(i, i).abs() - off;
            if gap < worst.1 {
                worst = (i, gap);
            }
        }
        worst
    }
}

/// Banded approximation of a collocation matrix, factored once as `L U` without pivoting.
#[derive(Debug, Clone)]
pub struct BandedPreconditioner {
    l: usize,
    band: BandMatrix,
    lu: BandMatrix,
}

impl BandedPreconditioner {
    /// Factors a band after checking strict diagonal dominance.
    pub fn from_band(band: BandMatrix) -> Result<Self> {
        let (row, gap) = band.dominance_gap();
        if band.size() > 0 && !(gap > 0.0) {
            return Err(Error::NotDiagonallyDominant { row, gap });
        }
        let lu = factor(&band)?;
        Ok(Self {
            l: band.half_width() + 1,
            band,
            lu,
        })
    }

    /// Bandwidth parameter: the band holds `2l - 1` diagonals.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn band(&self) -> &BandMatrix {
        &self.band
    }

    pub fn size(&self) -> usize {
        self.band.size()
    }

    /// `P z`.
    pub fn multiply(&self, z: &[f64]) -> Vec<f64> {
        self.band.matvec(z)
    }

    /// Solves `P z = r` by banded forward and back substitution.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        assert_eq!(r.len(), n);
        let mut z = r.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for j in self.lu.columns(i).filter(|&j| j < i) {
                acc -= self.lu.get(i, j) * z[j];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in self.lu.columns(i).filter(|&j| j > i) {
                acc -= self.lu.get(i, j) * z[j];
            }
            z[i] = acc / self.lu.get(i, i);
        }
        z
    }
}

fn factor(band: &BandMatrix) -> Result<BandMatrix> {
    let mut lu = band.clone();
    let n = lu.n;
    let w = lu.w;
    for k in 0..n {
        let pivot = lu.get(k, k);
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot(k));
        }
        for i in k + 1..(k + w + 1).min(n) {
            let factor = lu.get(i, k) / pivot;
            lu.set(i, k, factor);
            for j in k + 1..(k + w + 1).min(n) {
                let v = lu.get(i, j) - factor * lu.get(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Ok(lu)
}

/// Builds the band `|i - j| <= l - 1` of the unscaled collocation matrix.
///
/// For the original scheme with `alpha < 1` the entries come from the direct matrix;
/// otherwise they are the scheme's exact near-field entries (local stencil plus
/// closed-form kernel integrals against the hat-function derivatives).
pub fn build_banded_preconditioner(
    mesh: &GradedMesh,
    alpha: f64,
    scheme: Scheme,
    l: usize,
) -> Result<BandedPreconditioner> {
    let regime = Regime::of(alpha)?;
    let n = mesh.n() - 1;
    if l == 0 || 2 * l - 1 > n {
        return Err(Error::InvalidBandwidth { l, n });
    }
    let w = l - 1;
    let mut band = BandMatrix::zeros(n, w);
    for i in 0..n {
        for j in band.columns(i) {
            let v = if scheme == Scheme::Original && regime == Regime::Sub {
                direct_entry(mesh, alpha, i + 1, j + 1)
            } else {
                exact_entry(mesh, alpha, scheme, i + 1, j + 1)
            };
            band.set(i, j, v);
        }
    }
    BandedPreconditioner::from_band(band)
}

pub fn banded_solve(p: &BandedPreconditioner, r: &[f64]) -> Vec<f64> {
    p.solve(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Breakdown {
    RhoZero,
    OmegaZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// `None` selects `10 N`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// True residual `||f - A x||_2 / ||f||_2` of the returned solution.
    pub relative_residual: f64,
    pub converged: bool,
    pub breakdown: Option<Breakdown>,
    pub wall_time: Duration,
    /// Recurrence residuals, starting with the initial one.
    pub residual_history: Vec<f64>,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Right-preconditioned BiCGSTAB with shadow residual `r~ = r0`.
///
/// Stops early when `||s||` already meets the tolerance. Convergence is only declared
/// once the true residual of the iterate satisfies the tolerance as well.
pub fn bicgstab<A: LinearOperator + ?Sized>(
    a: &A,
    f: &[f64],
    x0: &[f64],
    opts: SolveOptions,
    precond: Option<&BandedPreconditioner>,
) -> Result<SolveReport> {
    let n = a.dim();
    for len in [f.len(), x0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    if let Some(p) = precond {
        if p.size() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.size(),
            });
        }
    }
    let start = Instant::now();
    let max_iter = opts.max_iter.unwrap_or(10 * n);
    let tol = opts.tol;
    let fnorm = norm2(f);
    if fnorm == 0.0 {
        return Ok(SolveReport {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            breakdown: None,
            wall_time: start.elapsed(),
            residual_history: vec![0.0],
        });
    }
    let precondition = |v: &[f64]| match precond {
        Some(p) => p.solve(v),
        None => v.to_vec(),
    };
    let true_residual = |x: &[f64]| {
        let ax = a.apply(x);
        let r: Vec<f64> = f.iter().zip(&ax).map(|(f, y)| f - y).collect();
        norm2(&r) / fnorm
    };

    let mut x = x0.to_vec();
    let ax = a.apply(&x);
    let mut r: Vec<f64> = f.iter().zip(&ax).map(|(f, y)| f - y).collect();
    let shadow = r.clone();
    let mut history = vec![norm2(&r) / fnorm];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho_prev, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut breakdown = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = history[0];

    if residual <= tol {
        converged = true;
    }
    while !converged && iterations < max_iter {
        iterations += 1;
        let rho = dot(&shadow, &r);
        if rho == 0.0 {
            breakdown = Some(Breakdown::RhoZero);
            break;
        }
        if iterations == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_prev) * (alpha / omega);
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
        }
        let p_hat = precondition(&p);
        a.apply_into(&p_hat, &mut v);
        let sv = dot(&shadow, &v);
        if sv == 0.0 {
            breakdown = Some(Breakdown::RhoZero);
            break;
        }
        alpha = rho / sv;
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        axpy(alpha, &p_hat, &mut x);
        let snorm = norm2(&s) / fnorm;
        if snorm <= tol {
            history.push(snorm);
            residual = true_residual(&x);
            if residual <= tol {
                converged = true;
                break;
            }
        }
        let s_hat = precondition(&s);
        a.apply_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        if omega == 0.0 {
            breakdown = Some(Breakdown::OmegaZero);
            break;
        }
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        let rnorm = norm2(&r) / fnorm;
        history.push(rnorm);
        if rnorm <= tol {
            residual = true_residual(&x);
            converged = residual <= tol;
        }
        rho_prev = rho;
    }
    if !converged {
        residual = true_residual(&x);
    }
    Ok(SolveReport {
        solution: x,
        iterations,
        relative_residual: residual,
        converged,
        breakdown,
        wall_time: start.elapsed(),
        residual_history: history,
    })
}

/// Solves `A x = f` by LU factorisation with partial pivoting.
pub fn dense_gaussian_elimination(a: &DenseMatrix, f: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 && n > 0 {
        return Err(Error::Singular);
    }
    let mut m = a.clone();
    let mut x = f.to_vec();
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pmax <= f64::EPSILON * scale {
            return Err(Error::Singular);
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        let pivot = m[(k, k)];
        let (upper, lower) = m.rows_split(k);
        for i in 0..lower.len() / n {
            let row = &mut lower[i * n..(i + 1) * n];
            let factor = row[k] / pivot;
            if factor != 0.0 {
                for j in k + 1..n {
                    row[j] -= factor * upper[j];
                }
                x[k + 1 + i] -= factor * x[k];
            }
            row[k] = 0.0;
        }
    }
    for i in (0..n).rev() {
        let row = m.row(i);
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= row[j] * x[j];
        }
        x[i] = acc / row[i];
    }
    Ok(x)
}
