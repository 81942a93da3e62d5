use thiserror::Error;

/// Errors produced while building meshes, spaces and systems, or while solving them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("group {group}: {message}")]
    Agglomeration { group: usize, message: String },

    #[error("space error: {0}")]
    Space(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("recovery error: {0}")]
    Recovery(String),

    #[error("problem error: {0}")]
    Problem(String),

    #[error("boundary classification failed on face {face}: {message}")]
    MixedFace { face: usize, message: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solver failed: {message}")]
    Solver {
        message: String,
        /// Relative residual after each iteration or restart, when available.
        residuals: Vec<f64>,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
