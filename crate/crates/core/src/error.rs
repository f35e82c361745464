use alloc::string::String;

/// Errors raised by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A solver or run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Configuration(String),
    /// An internal state transition was requested that the model forbids.
    #[error("logic error: {0}")]
    Logic(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail_arg {
    ($($t:tt)*) => {
        return Err($crate::error::Error::InvalidArgument(alloc::format!($($t)*)))
    };
}

macro_rules! bail_config {
    ($($t:tt)*) => {
        return Err($crate::error::Error::Configuration(alloc::format!($($t)*)))
    };
}

pub(crate) use bail_arg;
pub(crate) use bail_config;
