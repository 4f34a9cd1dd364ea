use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature order {0} out of range (1..=64)")]
    QuadratureOrder(usize),

    #[error("trace layouts differ ({0} vs {1} entries): operands live on different meshes")]
    MeshMismatch(usize, usize),

    #[error("candidate has energy norm {0:e} below the degeneracy floor")]
    DegenerateCandidate(f64),

    #[error("linear system is numerically zero")]
    DegenerateSystem,

    #[error("Gram matrix is numerically singular (smallest eigenvalue {0:e}); a basis function duplicates the span")]
    SingularGram(f64),

    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("run spec error in `{field}`: {message}")]
    Spec { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
