use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in `{field}`")]
    NonFinite { field: String },

    #[error("target out of leg workspace: distance {distance:.6} m outside [{min:.6}, {max:.6}] m")]
    OutOfWorkspace { distance: f64, min: f64, max: f64 },

    #[error("simulation diverged at t = {time:.3} s: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("coefficient of variation undefined: {0}")]
    UndefinedCv(&'static str),

    #[error("cost of transport undefined: mean forward velocity {0} <= 0")]
    UndefinedCot(f64),

    #[error("no stance foot carries load")]
    NoSupport,

    #[error("degenerate quadratic fit: {0}")]
    DegenerateFit(&'static str),

    #[error("CoT curves do not intersect inside [{lo}, {hi}] m/s")]
    NoIntersection { lo: f64, hi: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed log at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rejects any non-finite entry, naming `field` in the error.
pub(crate) fn ensure_finite(field: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
        })
    }
}
