use thiserror::Error;

/// Errors raised by mesh construction, SOE building, operator assembly and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("number of cells must be even, got {0}")]
    OddCellCount(usize),

    #[error("number of cells must be at least 4, got {0}")]
    TooFewCells(usize),

    #[error("grading parameter must satisfy kappa >= 1, got {0}")]
    KappaBelowOne(f64),

    #[error("empty interval: right endpoint {b} must exceed left endpoint {a}")]
    EmptyInterval { a: f64, b: f64 },

    #[error("fractional order must lie in (0, 2), got {0}")]
    AlphaOutOfRange(f64),

    #[error("direct collocation matrix requires alpha in (0, 1), got {0}")]
    DirectRegime(f64),

    #[error("SOE exponent must lie in (0, 2), got {0}")]
    BetaOutOfRange(f64),

    #[error("SOE tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("invalid SOE window [{delta_x}, {x_max}]")]
    InvalidWindow { delta_x: f64, x_max: f64 },

    #[error(
        "SOE window [{delta_x}, {x_max}] does not cover kernel arguments [{need_min}, {need_max}]"
    )]
    WindowDoesNotCover {
        delta_x: f64,
        x_max: f64,
        need_min: f64,
        need_max: f64,
    },

    #[error("SOE panel budget exhausted: achieved error {achieved:e}, target {target:e}")]
    SoeBudgetExhausted { achieved: f64, target: f64 },

    #[error("SOE terms must be positive and finite")]
    InvalidSoeTerms,

    #[error("SOE argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("SOE exponent {beta} does not match the {expected} required by the operator")]
    SoeExponentMismatch { beta: f64, expected: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix size {n} exceeds the audit cap {cap}")]
    AuditCapExceeded { n: usize, cap: usize },

    #[error("band half-width parameter l={l} invalid for {n} unknowns")]
    InvalidBandwidth { l: usize, n: usize },

    #[error("band is not strictly diagonally dominant at row {row} (gap {gap:e})")]
    NotDiagonallyDominant { row: usize, gap: f64 },

    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("errors must be positive for a convergence order, got ({0}, {1})")]
    NonPositiveError(f64, f64),

    #[error("no rows to emit")]
    EmptyRows,

    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed table input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
