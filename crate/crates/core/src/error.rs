use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The qubit operator has a single eigenvalue.
    #[error("degenerate conservation law: a scalar operator poses no constraint")]
    DegenerateLaw,

    #[error("rotated frame undefined: gate axis is parallel to the conservation direction (sin psi = {sin_psi:e})")]
    FrameDegenerate { sin_psi: f64 },

    #[error("truncation error: {0}")]
    Truncation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
