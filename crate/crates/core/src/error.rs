use thiserror::Error;

/// Errors raised by the numerical kernels and model evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("subdivision budget exhausted: best estimate {estimate:e} with error bound {error:e}")]
    NonConvergence { estimate: f64, error: f64 },

    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },

    #[error("tail beyond the truncation window dominates: tail uncertainty {tail_error:e} vs result {result:e}")]
    TailDominates { tail_error: f64, result: f64 },

    #[error("parity hint rejected: spot check failed at x = {at}")]
    ParityMismatch { at: f64 },

    #[error("principal value at {pole} did not converge: {reason}")]
    PvFailure { pole: f64, reason: String },

    #[error("numerical derivative unstable at omega = {omega}")]
    DerivativeUnstable { omega: f64 },

    #[error("response denominator vanishes at omega = {omega}")]
    DivisionNearZero { omega: f64 },

    #[error("zero norm: the compared functions vanish identically")]
    ZeroNorm,

    #[error("Cauchy-Schwarz violated beyond rounding (1 - ratio = {deficit:e})")]
    CauchySchwarz { deficit: f64 },

    #[error("trajectory became unstable at t = {time}")]
    UnstableStep { time: f64 },

    #[error("{quantifier} entry {entry}: {source}")]
    Entry {
        quantifier: &'static str,
        entry: &'static str,
        source: Box<Error>,
    },

    #[error("malformed spectral table at line {line}: {reason}")]
    Table { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
