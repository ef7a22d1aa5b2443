//! Shared fixtures for the criterion benchmarks.

use fraclap::{FastOperator, GradedMesh, Scheme};

/// Operator on `(0, 2)` with `n` cells, grading `kappa` and SOE tolerance `1e-8`.
pub fn operator(n: usize, kappa: f64, alpha: f64, scheme: Scheme) -> FastOperator {
    let mesh = GradedMesh::new(0.0, 2.0, n, kappa).expect("valid mesh");
    FastOperator::new(&mesh, alpha, scheme, 1e-8).expect("operator builds")
}

/// Smooth deterministic test vector of length `m`.
pub fn test_vector(m: usize) -> Vec<f64> {
    (0..m).map(|i| (0.37 * i as f64).sin()).collect()
}
