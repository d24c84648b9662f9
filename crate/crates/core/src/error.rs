use thiserror::Error;

/// Every failure the library can report.
///
/// Divergence of a fluctuating-boundary moment is *not* an error in sweeps
/// (see [`crate::fpt::CvEntry`]); it surfaces here only when a caller asks
/// for a single moment that does not exist.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the supported domain: {0}")]
    Domain(String),

    #[error("start point x0 = {x0} is not below the boundary S = {s}")]
    Ordering { s: f64, x0: f64 },

    #[error("load line is parallel to a device branch; no fixed point")]
    DegenerateLoadLine,

    #[error("oscillatory status is identical at both ends of [{lo}, {hi}] V")]
    NoBifurcationInRange { lo: f64, hi: f64 },

    #[error("series did not converge within {terms} terms")]
    SeriesDidNotConverge { terms: usize },

    #[error("expectation is infinite: the threshold tail outgrows the series")]
    Diverged,

    #[error("moment order {requested} exceeds the configured cap {cap}")]
    OrderTooHigh { requested: usize, cap: usize },

    #[error("computed variance {0:e} is negative; series precision failure")]
    NegativeVarianceComputed(f64),

    #[error("transistor leaves saturation: v_ds = {v_ds} V < v_gs - v_t0 = {v_ov} V")]
    SaturationViolated { v_ds: f64, v_ov: f64 },

    #[error("numerical blow-up at t = {t:e} s; the time step is too large")]
    NumericalBlowup { t: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("need at least {needed} interspike intervals, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("samples have zero variance")]
    DegenerateVariance,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
