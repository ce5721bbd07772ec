use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("underdetermined fit: {0}")]
    Underdetermined(String),

    #[error("inconsistent calibration data: {0}")]
    InconsistentData(String),

    #[error("rejected telemetry sample: {0}")]
    InvalidSample(String),

    #[error("scenario never exhausts the battery: {0}")]
    NonTerminating(String),

    #[error("telemetry stream rejected: {malformed} of {total} rows malformed")]
    StreamRejected { malformed: usize, total: usize },

    #[error("malformed telemetry header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures reading or writing files, including those surfaced
    /// through the CSV layer.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }

    /// True for errors caused by a document that fails validation, as opposed
    /// to numerical or I/O failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Json(_) | Error::BadHeader { .. }
        )
    }
}

/// Rejects NaN, infinities and values below `min`.
pub(crate) fn check_at_least(name: &'static str, value: f64, min: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(name, format!("must be finite, got {value}")));
    }
    if value < min {
        return Err(Error::invalid(name, format!("must be >= {min}, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
    }
    Ok(())
}
