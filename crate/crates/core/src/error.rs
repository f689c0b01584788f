use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Gabor parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("window coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },

    #[error("mainlobe proportion p = {0} is outside the admissible range")]
    InvalidProportion(f64),

    #[error("frame operator diagonal entry {index} is {value:e}; the window does not cover every residue class")]
    ZeroFrameDiagonal { index: usize, value: f64 },

    #[error("window is not tight: residue-class energies deviate by {deviation:e} (relative) from their mean {lambda:e}")]
    NotTight { lambda: f64, deviation: f64 },

    #[error("window has zero energy")]
    ZeroWindow,

    #[error("eigensolver did not converge for K = {0}")]
    EigenConvergence(usize),

    #[error("point is off the oblique manifold: block {block} has norm {norm:e}, expected {expected:e}")]
    OffManifold {
        block: usize,
        norm: f64,
        expected: f64,
    },

    #[error("vector is not tangent: block {block} has inner product {inner:e} with the base point")]
    NotTangent { block: usize, inner: f64 },

    #[error("Newton system was built at a different base point")]
    StaleSystem,

    #[error("Newton system is singular or the solve is inaccurate (relative residual {residual:e})")]
    SingularSystem { residual: f64 },

    #[error("retraction failed: block {block} of w + v has norm {norm:e}")]
    ZeroBlock { block: usize, norm: f64 },

    #[error("mainlobe list must be nonempty and sorted ascending")]
    InvalidSweep,

    #[error("format error: {0}")]
    Format(String),
}
