//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the identification lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("system is not exponentially stable: pole modulus {modulus} >= 1")]
    NotStable { modulus: f64 },
    #[error("impulse-response envelope fit did not converge within {horizon} lags")]
    NoConvergence { horizon: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid coefficients: {context}")]
    InvalidCoefficients { context: String },
    #[error("unsupported PRBS order {order}; tabulated orders are 2..=16")]
    UnsupportedOrder { order: u32 },
    #[error("duplicate multisine line at frequency index {index}")]
    DuplicateLine { index: usize },
    #[error("cannot schedule {requested} experiments on a period of {period} samples")]
    TooManyExperiments { requested: usize, period: usize },
    #[error("excitation is not exciting at required frequency index {index}")]
    NotExciting { index: usize },
    #[error("frequency index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("signal length mismatch: {context}")]
    LengthMismatch { context: String },
    #[error("grid mismatch: M = {m} does not divide N = {n}")]
    GridMismatch { m: usize, n: usize },
    #[error("input DFT singular or ill-conditioned at grid index {index}")]
    SingularInput { index: usize },
    #[error("failure probability must lie in (0, 1), got {delta}")]
    InvalidDelta { delta: f64 },
    #[error("missing excitation level sigma_u at grid index {index}")]
    MissingSigmaU { index: usize },
    #[error("no integer (M, N/M) pair realizes c1 = {c1} near N = {n} within tolerance")]
    GridInfeasible { c1: f64, n: usize },
    #[error("noise spectrum is zero at the requested frequency; SNR is undefined")]
    ZeroNoise,
    #[error("naive estimator has no estimate for the cell containing omega = {omega}")]
    MissingCell { omega: f64 },
    #[error("rate fit needs at least three strictly positive means, got {context}")]
    NonPositive { context: String },
    #[error("evaluation grid density {density} is below the minimum {minimum}")]
    GridTooCoarse { density: usize, minimum: usize },
    #[error("operator truncation too short: declared tail {tail} exceeds 1% of Frobenius norm {frobenius}")]
    TruncationTooShort { tail: f64, frobenius: f64 },
    #[error("matrix is singular and cannot be inverted")]
    SingularMatrix,
    #[error("sweep aborted: {failed} of {total} trials failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("configuration error: {context}")]
    Config { context: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
