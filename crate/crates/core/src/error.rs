use thiserror::Error;

/// Errors produced by the geometry, meshing, assembly and analysis layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension N={0}: {1}")]
    UnsupportedDimension(usize, String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("singularity error: {0}")]
    Singularity(String),

    #[error("meshing error: {0}")]
    Meshing(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("well-posedness error: {0}")]
    WellPosedness(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("ill-conditioned fit: condition number {0:.3e}")]
    IllConditionedFit(f64),

    #[error("integrability error: fitted exponent {fitted:.4} does not exceed required {required:.4}")]
    Integrability { fitted: f64, required: f64 },

    #[error("trivial field: {0}")]
    TrivialField(String),

    #[error("underflow error: {0}")]
    Underflow(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
