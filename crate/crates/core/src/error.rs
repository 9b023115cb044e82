use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate path: {0}")]
    DegeneratePath(String),
    #[error("ODE solution escaped bound {bound} at time {time}")]
    BlowUp { time: f64, bound: f64 },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}
