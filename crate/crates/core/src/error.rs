use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter was outside its admissible range.
    #[error("{name} out of range: {value} (expected {expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Numerical integration or root finding failed to meet tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("engine has already stopped at step {0}")]
    AlreadyStopped(u64),

    /// The CEI bound cannot be evaluated directly for this variant.
    #[error("CEI variant `estimated` has no closed-form bound")]
    EstimatedCei,

    #[error("calibration constant has not been set")]
    CalibrationUnset,

    #[error("certificate is not a stop certificate")]
    NotStopCertificate,

    #[error("observed best {0} is not in the pool's q_hat support")]
    NotInSupport(f64),

    #[error("group {0} has no records")]
    EmptyGroup(u8),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("run {run}: {source}")]
    Run {
        run: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks `lo < value < hi`.
pub(crate) fn open_interval(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value > lo && value < hi {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: format!("({lo}, {hi})"),
        })
    }
}

/// Checks `0 <= value <= 1`.
pub(crate) fn unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "[0, 1]".into(),
        })
    }
}
