use thiserror::Error;

/// Errors raised while building meshes, spaces and systems or while solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("numerical error on element {element}: {message}")]
    Numerical { element: usize, message: String },

    #[error("solver error: {message} (momentum residual {momentum:.3e}, mass residual {mass:.3e}, constraint residual {constraint:.3e})")]
    Solver {
        message: String,
        momentum: f64,
        mass: f64,
        constraint: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn numerical(element: usize, msg: impl Into<String>) -> Self {
        Error::Numerical {
            element,
            message: msg.into(),
        }
    }
}
