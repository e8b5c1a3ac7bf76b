use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation degree {trunc} is below the minimum {min}")]
    InvalidTruncation { trunc: usize, min: usize },

    #[error("degree {n} exceeds the supported maximum {max}")]
    DegreeTooLarge { n: usize, max: usize },

    #[error("grid {nlat}x{nlon} cannot hold degree {trunc}: {reason}")]
    GridTooSmall { trunc: usize, nlat: usize, nlon: usize, reason: &'static str },

    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spectrum of degree {trunc} exceeds grid capacity {capacity}")]
    TruncationExceedsGrid { trunc: usize, capacity: usize },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("field has nonzero mean (degree-0 coefficient {0:e})")]
    NonzeroMean(f64),

    #[error("non-finite state after step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },

    #[error("family is rank deficient at vector {index} (diagonal factor {factor:e})")]
    RankDeficient { index: usize, factor: f64 },

    #[error("m = {m} lies outside the range [{min}, inf) covered by the bound")]
    OutsideProofRange { m: f64, min: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
