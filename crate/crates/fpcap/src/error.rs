//! Error types shared across the crate.

use crate::solver::SaddleSolution;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// `d2(p || q)` with `q` on the boundary and `p != q` diverges.
    #[error("infinite divergence: d2({p} || {q})")]
    InfiniteDivergence { p: f64, q: f64 },

    /// Payoff gradient requested at a channel coordinate pinned to 0 or 1.
    #[error("gradient undefined at boundary: p[{index}] = {value}")]
    BoundaryGradient { index: usize, value: f64 },

    #[error("invalid collusion channel: {0}")]
    InvalidChannel(String),

    #[error("invalid code distribution: {0}")]
    InvalidDistribution(String),

    /// Box-constrained descent hit its iteration cap; carries the best iterate.
    #[error("descent did not converge: projected-gradient norm {grad_norm:.3e} after {iterations} iterations")]
    DescentNotConverged {
        grad_norm: f64,
        iterations: usize,
        best: Vec<f64>,
    },

    /// The outer saddle loop hit its iteration cap; carries the best
    /// capacity bracket `[maxmin/k, minmax/k]` and the best solution found.
    #[error("solver did not converge: best capacity bracket [{lower:.12e}, {upper:.12e}]")]
    SolverNotConverged {
        lower: f64,
        upper: f64,
        best: Box<SaddleSolution>,
    },

    /// A refinement gate (e.g. quadrature doubling) failed to stabilize.
    #[error("convergence gate failed: {what} (last change {change:.3e})")]
    GateFailed { what: String, change: f64 },

    /// The brute-force oracle only supports small coalitions.
    #[error("oracle supports k <= 3, got k = {0}")]
    UnsupportedCoalition(usize),

    #[error("malformed solution document: {0}")]
    MalformedDocument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
