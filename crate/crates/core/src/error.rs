use thiserror::Error;

pub type Result<T> = std::result::Result<T, DilateError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilateError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} lies outside the tabulated profile domain [{start}, {end}]")]
    ProfileDomain { t: f64, start: f64, end: f64 },

    #[error("channel at grid point {index} (t = {t}) is not CPTP: min Choi eigenvalue {min_eigenvalue:e}, trace-preservation residual {tp_residual:e}")]
    NotCptp {
        index: usize,
        t: f64,
        min_eigenvalue: f64,
        tp_residual: f64,
    },

    #[error("trace drifted by {drift:e} at grid point {index} (t = {t})")]
    TraceDrift { index: usize, t: f64, drift: f64 },

    #[error("Kraus completeness violated by {residual:e} at grid point {index} (t = {t})")]
    Completeness { index: usize, t: f64, residual: f64 },

    #[error("Gram-Schmidt breakdown at grid point {index} (t = {t}): completion column {column} has norm {norm:e} after projection")]
    GramSchmidtBreakdown {
        index: usize,
        t: f64,
        column: usize,
        norm: f64,
    },

    #[error("Hamiltonian path is not of the form h(t)·X: deviation {residual:e} at grid point {index} (t = {t})")]
    NonFactorable { index: usize, t: f64, residual: f64 },

    #[error("channels do not commute at t = {t}: ‖ε₁ε₂ − ε₂ε₁‖ = {residual:e}")]
    NonCommuting { t: f64, residual: f64 },

    #[error("perturbation changes the Kraus rank at grid point {index} (t = {t}): first-order weight {weight:e} on a vanishing Kraus track (the O(√δ) branch is not supported)")]
    RankChange { index: usize, t: f64, weight: f64 },

    #[error("Hamiltonian diverges at t = {t}; start later or apply a cutoff")]
    Divergent { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("composite dimension {requested} exceeds the configured cap {cap}")]
    DimensionCap { requested: usize, cap: usize },
}
