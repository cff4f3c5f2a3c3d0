use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mesh resolution must be at least 1 in each direction (got {nx}x{ny})")]
    ZeroResolution { nx: usize, ny: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh parse error on line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("unsupported element order {0} (expected 1 or 2)")]
    UnsupportedOrder(usize),

    #[error("constrained divergence-free space is trivial")]
    EmptySpace,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exponent must satisfy p >= 1 (got {0})")]
    InvalidExponent(f64),

    #[error("degenerate sampling range [{lo}, {hi}]")]
    DegenerateRange { lo: f64, hi: f64 },

    #[error("prox step too large: step*weight*m = {0} >= 1")]
    StepTooLarge(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("normal-trace form vanishes on the reduced space")]
    NoBoundaryDofs,

    #[error("maximum iterations ({iterations}) exceeded, last residual {residual:e}")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("Picard map is not certified contractive (sigma_f = {0})")]
    NotContractive(f64),

    #[error("uniform bound violated at t = {t}: lhs {lhs:e} > rhs {rhs:e}")]
    BoundViolated { t: f64, lhs: f64, rhs: f64 },

    #[error("dense oracle supports reduced_dim <= {max} (got {got})")]
    DimensionTooLarge { max: usize, got: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
