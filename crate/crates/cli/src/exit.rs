//! Process exit codes and the mapping from errors to them.

use std::fmt;

use resynth::Error;

pub const SUCCESS: u8 = 0;
pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const INTERNAL: u8 = 3;

/// An error the user caused through arguments or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Input data that is missing, malformed or inconsistent.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

/// Shorthand for returning a [`DataError`].
pub fn data<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(DataError(msg.into()).into())
}

/// Shorthand for returning a [`UsageError`].
pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => USAGE,
        Error::Io { .. }
        | Error::UnsupportedFormat(_)
        | Error::Decode { .. }
        | Error::ZeroDimension { .. }
        | Error::DimensionMismatch { .. }
        | Error::RetryExhausted(_)
        | Error::CropTooLarge { .. }
        | Error::SingleClass
        | Error::NoPositives
        | Error::EmptyInput(_)
        | Error::Checkpoint(_)
        | Error::StageMismatch { .. } => DATA,
    }
}

/// Exit code for an error chain: the first recognized cause decides.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if cause.is::<DataError>() {
            return DATA;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return DATA;
        }
    }
    INTERNAL
}
