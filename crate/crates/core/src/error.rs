use thiserror::Error;

pub type Result<T> = std::result::Result<T, QflowError>;

#[derive(Debug, Error)]
pub enum QflowError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("band-limit mismatch: field needs degree {needed}, grid resolves {available}")]
    Mismatch { needed: usize, available: usize },

    #[error("point is not on the unit sphere (|x|^2 - 1 = {0:e})")]
    NotOnSphere(f64),

    /// ∫ f e^{4u} dv_c ≤ 0, so α is undefined.
    #[error("non-admissible state: int f e^(4u) dv_c = {0:e} <= 0")]
    NonAdmissible(f64),

    #[error("exponential overflow: max exponent {0:.3} exceeds 700 (blow-up)")]
    Overflow(f64),

    #[error("spectral tail fraction {fraction:e} exceeds abort threshold {threshold:e}")]
    Resolution { fraction: f64, threshold: f64 },

    #[error("prescribed function is not positive anywhere (max f = {0:e})")]
    NotPositiveSomewhere(f64),

    #[error("critical point search failed: {0}")]
    CriticalPoints(String),

    #[error("critical points are not isolated ({0} degenerate points found)")]
    Degenerate(usize),

    #[error("gauge normalization did not converge after {iterations} iterations (|com| = {com_norm:e})")]
    GaugeFailure { iterations: usize, com_norm: f64 },

    #[error("step size fell below dt_min = {0:e} with persistent rejection")]
    StepUnderflow(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
