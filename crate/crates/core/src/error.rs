use thiserror::Error;

/// Errors raised while building meshes, assembling or solving the discrete system.
#[derive(Debug, Error)]
pub enum HdgError {
    #[error("mesh parse error: {0}")]
    MeshParse(String),

    #[error("invalid mesh: {0}")]
    MeshValidation(String),

    #[error("quadrature of degree {requested} unavailable (maximum supported degree is {max})")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("unsupported polynomial degree {degree}: {reason}")]
    UnsupportedDegree { degree: usize, reason: &'static str },

    #[error("singular local matrix on cell {cell} ({context})")]
    SingularLocal { cell: usize, context: &'static str },

    #[error("sparse factorization failed (dim = {dim}, nnz = {nnz}): {reason}")]
    Factorization {
        dim: usize,
        nnz: usize,
        reason: String,
    },

    #[error("unknown example id {0} (expected 1 or 2)")]
    UnknownExample(u32),

    #[error("refinement levels must double successively, got {prev} followed by {next}")]
    NonDoubling { prev: f64, next: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HdgError>;
