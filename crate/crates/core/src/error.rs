use thiserror::Error;

/// Invalid parameters for a model, controller or term set.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct ConfigError {
    message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
        }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("no rule fired; the aggregated output set is empty")]
    EmptyOutput,
    #[error("rule activation outside [0, 1]")]
    InvalidActivation,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("non-finite controller input {0}")]
    NonFiniteInput(f64),
    #[error("fuzzy inference failed: {0}")]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("calibration sweep has no power variation")]
    NoPowerVariance,
    #[error("fitted detector slope is zero")]
    ZeroSlope,
    #[error("non-finite value in calibration sweep")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvmError {
    #[error("unsupported QAM order {0} (expected 16, 64 or 256)")]
    UnsupportedOrder(usize),
    #[error("batch lengths differ: reference {reference}, measured {measured}")]
    LengthMismatch { reference: usize, measured: usize },
    #[error("reference batch has zero power")]
    ZeroReference,
    #[error("measured batch has zero correlation with the reference")]
    ZeroGain,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
}
