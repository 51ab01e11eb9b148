use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("disc map applied to a half-plane point or vice versa")]
    ModelMismatch,
    #[error("point is the pole of the map")]
    Pole,
    #[error("map has no isometric circle (β = 0)")]
    NoIsometricCircle,
    #[error("unknown cusp index {0}")]
    UnknownCusp(usize),
    #[error("unknown built-in group `{0}`")]
    UnknownGroup(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("vertex not recognised: {0}")]
    UnknownVertex(String),
    #[error("config: {0}")]
    Config(String),
    #[error("word backtracks at position {0}")]
    Backtrack(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("power iteration produced a non-positive entry")]
    NonPositive,
    #[error("root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}")]
    Bracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("too many blocks: {0}")]
    TooManyBlocks(u128),
    #[error("sign violation: {0}")]
    Sign(String),
    #[error("ill-conditioned fit: {0}")]
    Fit(String),
    #[error("expansion reached an arc endpoint")]
    Endpoint,
}

pub type Result<T> = std::result::Result<T, Error>;
