use thiserror::Error;

/// Errors produced by the spectral toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("empty basis: no Dirichlet eigenvalue below 2^{} = {cutoff}", .level + 1)]
    EmptyBasis { level: u32, cutoff: f64 },

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("fields live on different bases")]
    BasisMismatch,

    #[error("exponent p = {0} is not allowed (need p >= 2)")]
    InvalidExponent(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate base point: L2 norm {0:e} is below 1e-8")]
    DegenerateBase(f64),

    #[error("initial datum annihilated by S_(m-1): smoothed norm {0:e}")]
    AnnihilatedInitialDatum(f64),

    #[error("invalid flow configuration: {0}")]
    InvalidFlowConfig(String),

    #[error("blow-up detected at t = {t} (step {step}): non-finite coefficient")]
    BlowUp { t: f64, step: usize },

    #[error("no convergence after {steps} steps: last residual {residual:e}")]
    NonConvergence { steps: usize, residual: f64 },

    #[error("no positive solution in this regime: lambda = {lambda} <= lambda_1 = {lambda1}")]
    NoPositiveSolution { lambda: f64, lambda1: f64 },

    #[error("sub/super iteration lost monotonicity at iteration {iteration} (excess {excess:e})")]
    NonMonotoneIteration { iteration: usize, excess: f64 },

    #[error("bracket not found: mass stays below 1 up to lambda = {0}")]
    BracketNotFound(f64),

    #[error("empty ledger")]
    EmptyLedger,

    #[error("snapshot parse error: {0}")]
    Snapshot(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
