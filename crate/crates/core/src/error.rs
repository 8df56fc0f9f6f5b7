use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need more than {min}")]
    InputTooShort { len: usize, min: usize },

    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative magnitude {value} at ({frame}, {bin})")]
    NegativeMagnitude { frame: usize, bin: usize, value: f64 },

    #[error("undefined weights: magnitude spectrum sums to zero")]
    UndefinedWeights,

    #[error("zero-energy {0}")]
    ZeroEnergy(&'static str),

    #[error("unsupported decimation factor {0} (expected 2 or 4)")]
    UnsupportedFactor(usize),

    #[error("quality score {0} outside [0, 1]")]
    QualityOutOfRange(f64),

    #[error(transparent)]
    Wav(#[from] crate::wav::WavError),

    #[error(transparent)]
    Weights(#[from] crate::nn::weights::WeightError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(what: &'static str, expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            what,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
