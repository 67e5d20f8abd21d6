use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {dim}: need at least {min} Fock levels")]
    InvalidDimension { dim: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("delta kernel has no memory integral; use generators::gup_markov_rhs instead")]
    DeltaKernelRedirect,

    #[error("step size dt = {dt:e} exceeds {limit:e} (kernel correlation time / 10)")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("positivity failure at step {step} (t = {t:e}): min eigenvalue {min_eigenvalue:e}")]
    PositivityFailure {
        step: usize,
        t: f64,
        min_eigenvalue: f64,
    },

    #[error("state diverged at step {step} (t = {t:e}): non-finite matrix entries")]
    NonFinite { step: usize, t: f64 },

    #[error("noise correlation time {tau:e} must be at least 5 dt = {min:e}")]
    NoiseResolution { tau: f64, min: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error(
        "matrix element <{m}|K^2I|{n}> is not tabulated in closed form; \
         compute it with generators::heisenberg_k2"
    )]
    UnsupportedElement { m: usize, n: usize },

    #[error("damping series truncated at level {n_max}: tail estimate {tail:e} exceeds 1e-10")]
    SeriesTruncation { n_max: usize, tail: f64 },

    #[error("fit did not converge after {iterations} iterations (last cost {cost:e}, last lambda {lambda:e})")]
    FitFailure {
        iterations: usize,
        cost: f64,
        lambda: f64,
    },

    #[error("fit initialisation failed: {0}")]
    FitInitialisation(String),

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}
