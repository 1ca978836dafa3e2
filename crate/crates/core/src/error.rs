use thiserror::Error;

/// Errors raised by the cage solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("orbital evaluated before normalization")]
    Unnormalized,

    #[error("non-finite integrand value at quadrature node {node}")]
    NonFiniteIntegrand { node: usize },

    #[error("quadrature failed for matrix element ({row}, {col}): {source}")]
    Element {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("overlap matrix has no eigenvalue above the retention threshold")]
    EmptyBasis,

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFiniteMatrix { row: usize, col: usize },

    #[error("level {level} out of range (retained dimension {available})")]
    LevelOutOfRange { level: usize, available: usize },

    #[error("electron count {count} invalid for {levels} levels")]
    InvalidFilling { count: usize, levels: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that come from the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteIntegrand { .. }
                | Error::Element { .. }
                | Error::EmptyBasis
                | Error::NonFiniteMatrix { .. }
                | Error::Unnormalized
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
