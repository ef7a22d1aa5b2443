//! Symmetric graded partitions of `[a, b]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric graded mesh `x_i = a + L (2i/N)^kappa` on the left half, mirrored on the right.
///
/// Besides node positions the mesh keeps the left-half offsets `x_i - a`, so that
/// distances between nodes can be formed without cancelling against `a` or `b`.
/// For strong grading (large `kappa` and `N`) nodes next to `b` may round onto `b`
/// while the corresponding steps stay positive; all geometry used by the solvers
/// goes through [`GradedMesh::h`] and [`GradedMesh::distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedMesh {
    a: f64,
    b: f64,
    n: usize,
    kappa: f64,
    offsets: Vec<f64>,
    nodes: Vec<f64>,
    steps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_min: f64,
    pub h_max: f64,
}

impl GradedMesh {
    pub fn new(a: f64, b: f64, n: usize, kappa: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::EmptyInterval { a, b });
        }
        if n % 2 == 1 {
            return Err(Error::OddCellCount(n));
        }
        if n < 4 {
            return Err(Error::TooFewCells(n));
        }
        if !kappa.is_finite() || kappa < 1.0 {
            return Err(Error::KappaBelowOne(kappa));
        }
        let half = n / 2;
        let l = 0.5 * (b - a);
        let offsets: Vec<f64> = (0..=half)
            .map(|i| {
                if i == 0 {
                    0.0
                } else if i == half {
                    l
                } else {
                    l * (2.0 * i as f64 / n as f64).powf(kappa)
                }
            })
            .collect();

        let mut nodes = vec![0.0; n + 1];
        for i in 0..=half {
            nodes[i] = a + offsets[i];
        }
        for i in 0..half {
            nodes[n - i] = (a + b) - nodes[i];
        }
        nodes[0] = a;
        nodes[n] = b;

        let mut steps = vec![0.0; n];
        for j in 1..=half {
            let h = offsets[j] - offsets[j - 1];
            steps[j - 1] = h;
            steps[n - j] = h;
        }
        Ok(Self {
            a,
            b,
            n,
            kappa,
            offsets,
            nodes,
            steps,
        })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(a, b, n, 1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Number of cells `N`; there are `N - 1` interior unknowns.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Steps `h_1..h_N` stored zero-based.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Step `h_j = x_j - x_{j-1}` for `1 <= j <= N`.
    #[inline]
    pub fn h(&self, j: usize) -> f64 {
        self.steps[j - 1]
    }

    /// `x_i - a`, computed from the offsets.
    pub fn dist_from_left(&self, i: usize) -> f64 {
        let half = self.n / 2;
        if i <= half {
            self.offsets[i]
        } else {
            self.length() - self.offsets[self.n - i]
        }
    }

    /// `b - x_i`, computed from the offsets.
    pub fn dist_from_right(&self, i: usize) -> f64 {
        self.dist_from_left(self.n - i)
    }

    /// `|x_j - x_i|` without cancellation near either endpoint.
    ///
    /// `distance(i, i + 1)` is bit-identical to `h(i + 1)`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if lo == hi {
            return 0.0;
        }
        let half = self.n / 2;
        let o = &self.offsets;
        if hi <= half {
            o[hi] - o[lo]
        } else if lo >= half {
            o[self.n - lo] - o[self.n - hi]
        } else {
            (o[half] - o[lo]) + (o[half] - o[self.n - hi])
        }
    }

    pub fn stats(&self) -> MeshStats {
        let mut h_min = f64::INFINITY;
        let mut h_max = 0.0f64;
        for &h in &self.steps {
            h_min = h_min.min(h);
            h_max = h_max.max(h);
        }
        MeshStats { h_min, h_max }
    }

    /// True when every step is bit-identical to the first one.
    pub fn is_uniform(&self) -> bool {
        self.steps.iter().all(|&h| h == self.steps[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn quadratic_grading_nodes() {
        let m = GradedMesh::new(0.0, 2.0, 4, 2.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 1.0, 1.75, 2.0]);
    }

    #[test]
    fn unit_kappa_is_uniform() {
        let m = GradedMesh::new(0.0, 2.0, 4, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(m.is_uniform());
    }

    #[test]
    fn cubic_grading_nodes() {
        let m = GradedMesh::new(0.0, 2.0, 6, 3.0).unwrap();
        let expect = [
            0.0,
            1.0 / 27.0,
            8.0 / 27.0,
            1.0,
            46.0 / 27.0,
            53.0 / 27.0,
            2.0,
        ];
        assert!(close(m.nodes(), &expect, 1e-15));
    }

    #[test]
    fn stats_examples() {
        let s = GradedMesh::uniform(0.0, 2.0, 4).unwrap().stats();
        assert_eq!((s.h_min, s.h_max), (0.5, 0.5));
        let s = GradedMesh::new(0.0, 2.0, 4, 2.0).unwrap().stats();
        assert_eq!((s.h_min, s.h_max), (0.25, 0.75));
        let s = GradedMesh::new(0.0, 2.0, 6, 3.0).unwrap().stats();
        assert!((s.h_min - 1.0 / 27.0).abs() < 1e-16);
        assert!((s.h_max - 19.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn validation_errors_are_distinct() {
        assert_eq!(
            GradedMesh::new(0.0, 2.0, 7, 1.0),
            Err(Error::OddCellCount(7))
        );
        assert_eq!(
            GradedMesh::new(0.0, 2.0, 2, 1.0),
            Err(Error::TooFewCells(2))
        );
        assert_eq!(
            GradedMesh::new(0.0, 2.0, 8, 0.5),
            Err(Error::KappaBelowOne(0.5))
        );
        assert_eq!(
            GradedMesh::new(1.0, 1.0, 8, 1.0),
            Err(Error::EmptyInterval { a: 1.0, b: 1.0 })
        );
    }

    #[test]
    fn strong_grading_keeps_positive_steps() {
        let m = GradedMesh::new(0.0, 2.0, 1024, 8.0).unwrap();
        assert!(m.steps().iter().all(|&h| h > 0.0));
        assert_eq!(m.distance(1022, 1023), m.h(1023));
        assert_eq!(m.dist_from_right(1023), m.h(1024));
    }

    #[test]
    fn doubling_n_halves_h_max() {
        for (kappa, n0) in [(1.0, 64), (2.0, 64), (3.0, 64), (8.0, 256)] {
            for n in [n0, 2 * n0, 8 * n0] {
                let h1 = GradedMesh::new(0.0, 2.0, n, kappa).unwrap().stats().h_max;
                let h2 = GradedMesh::new(0.0, 2.0, 2 * n, kappa)
                    .unwrap()
                    .stats()
                    .h_max;
                assert!((h1 / h2 / 2.0 - 1.0).abs() < 0.05, "kappa={kappa} n={n}");
            }
        }
    }

    proptest! {
        #[test]
        fn invariants(a in -5.0f64..5.0, len in 0.1f64..10.0, half in 2usize..200, kappa in 1.0f64..8.0) {
            let b = a + len;
            let n = 2 * half;
            let m = GradedMesh::new(a, b, n, kappa).unwrap();
            let x = m.nodes();
            let ulp = f64::EPSILON * a.abs().max(b.abs()).max(len);
            prop_assert_eq!(x[0], a);
            prop_assert_eq!(x[n], b);
            for i in 0..=n {
                prop_assert!((x[n - i] - (a + b - x[i])).abs() <= 4.0 * ulp);
            }
            prop_assert!(m.steps().iter().all(|&h| h > 0.0));
            let total: f64 = m.steps().iter().sum();
            prop_assert!((total - len).abs() <= n as f64 * ulp);
            prop_assert_eq!(m.stats().h_min, m.h(1));
            let c = 0.5 * len * 2f64.powf(kappa) * kappa * (1.0 + 1e-12);
            for i in 1..=half {
                let bound = c * (n as f64).powf(-kappa) * (i as f64).powf(kappa - 1.0);
                prop_assert!(m.h(i) <= bound);
            }
            for i in 0..n {
                prop_assert_eq!(m.distance(i, i + 1), m.h(i + 1));
            }
        }

        #[test]
        fn uniform_spacing(half in 2usize..300) {
            let m = GradedMesh::uniform(0.0, 2.0, 2 * half).unwrap();
            let h = 2.0 / (2 * half) as f64;
            for &s in m.steps() {
                prop_assert!((s - h).abs() <= 4.0 * f64::EPSILON * 2.0);
            }
        }

        #[test]
        fn reflection_preserves_node_set(half in 2usize..100, kappa in 1.0f64..6.0) {
            let m = GradedMesh::new(0.0, 2.0, 2 * half, kappa).unwrap();
            let mut refl: Vec<f64> = m.nodes().iter().map(|x| 2.0 - x).collect();
            refl.reverse();
            prop_assert!(close(&refl, m.nodes(), 4.0 * f64::EPSILON * 2.0));
        }
    }
}
