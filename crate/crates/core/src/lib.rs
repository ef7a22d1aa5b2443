//! Fast collocation solvers for the one-dimensional integral fractional Laplacian
//! with homogeneous Dirichlet exterior data.
//!
//! The crate provides symmetric graded meshes, sum-of-exponentials (SOE) kernel
//! compression, matrix-free application of the original and modified collocation
//! operators in `O(N * Ne)` time, a banded-preconditioned BiCGSTAB solver, and the
//! harness used to measure errors and convergence orders against the closed-form
//! solution for `f = 1`.

pub mod benchmark;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod operator;
mod quadrature;
pub mod soe;
pub mod solver;
pub mod special;

pub use benchmark::{
    convergence_order, emit_table, exact_nodal_values, exact_solution, fill_orders, max_norm_error,
    parse_csv, run_convergence_study, KappaSpec, OutputFormat, SolverKind, StudyConfig, StudyRow,
    StudyScheme,
};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, LinearOperator};
pub use mesh::{GradedMesh, MeshStats};
pub use operator::{
    assemble_direct_matrix, audit_solvability, normalization_constant, AuditReport,
    CoefficientTables, FastOperator, Regime, Scheme,
};
pub use soe::{SoeApproximation, SoeTolerance};
pub use solver::{
    banded_solve, bicgstab, build_banded_preconditioner, dense_gaussian_elimination,
    BandedPreconditioner, Breakdown, SolveOptions, SolveReport,
};
