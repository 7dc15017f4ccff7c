use thiserror::Error;

/// Errors raised by the laboratory. Variants name the stage that failed so
/// that harness diagnostics can point at the offending module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coefficient field is not strictly hyperbolic: Rayleigh quotient {quotient} at t={t}")]
    NotHyperbolic { t: f64, quotient: f64 },

    #[error("quadrature under-resolved: kernel mass {mass} deviates from 1 by {deviation:e}")]
    QuadratureUnderResolved { mass: f64, deviation: f64 },

    #[error("grid size {0} is not a power of two >= 8")]
    BadGrid(usize),

    #[error("block index {index} out of range 0..={max}")]
    BlockOutOfRange { index: usize, max: usize },

    #[error("gamma search exhausted at 2^{max_exponent}: worst quotient {worst_quotient} < {threshold}")]
    GammaSearchExhausted {
        max_exponent: u32,
        worst_quotient: f64,
        threshold: f64,
    },

    #[error("step size underflow at t={t} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("criterion `{criterion}` cannot be checked against report `{report}`")]
    CriterionMismatch { criterion: String, report: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an error with the harness stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
