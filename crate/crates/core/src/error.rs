use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid stimulus grid: {0}")]
    Grid(String),
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("invalid rate target: {0}")]
    RateTarget(String),
    #[error("invalid objective: {0}")]
    Objective(String),
    #[error("invalid energy constraint: {0}")]
    Energy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("simulation diverged at t = {t_ms} ms (V = {v_mv} mV)")]
    Divergence { t_ms: f64, v_mv: f64 },
    #[error("target mu_F = {target} unreachable for g_syn in [{lo}, {hi}] (mu_F spans [{mu_lo}, {mu_hi}])")]
    Unreachable {
        target: f64,
        lo: f64,
        hi: f64,
        mu_lo: f64,
        mu_hi: f64,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rank-deficient design matrix ({rank} of {columns} columns independent)")]
    RankDeficient { rank: usize, columns: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-monotone input: {0}")]
    NonMonotone(String),
    #[error("empty contour at epsilon = {0}")]
    EmptyContour(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
