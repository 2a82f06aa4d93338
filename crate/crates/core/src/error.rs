use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied parameters violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("failed to read mesh {path}: {source}")]
    MeshIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("degenerate mesh element #{index} (measure {measure:e})")]
    DegenerateElement { index: usize, measure: f64 },

    #[error("operator of size {n}x{n} needs {bytes} bytes, allocation failed")]
    Allocation { n: usize, bytes: usize },

    #[error("operator size {n}x{n} overflows the addressable entry count")]
    SizeOverflow { n: usize },

    #[error("eigensolver did not converge on a {n}x{n} operator (diagonal range [{min_diag:e}, {max_diag:e}])")]
    NoConvergence {
        n: usize,
        min_diag: f64,
        max_diag: f64,
    },

    /// A negative eigenvalue beyond round-off: the operator was not assembled correctly.
    #[error("operator is not positive semidefinite: λ_min = {min:e} with λ_max = {max:e}")]
    NotPositiveSemidefinite { min: f64, max: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("field has zero energy on the receiver")]
    ZeroEnergy,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad configuration rather than a numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::UnsupportedGeometry(_)
                | Error::MeshIo { .. }
                | Error::MeshParse { .. }
                | Error::DegenerateElement { .. }
                | Error::InvalidScenario(_)
        )
    }
}
