use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke a shape or range precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A configuration value is out of range or inconsistent with the data.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $kind:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$kind(alloc::format!($($arg)+)));
        }
    };
}

pub(crate) use ensure;
