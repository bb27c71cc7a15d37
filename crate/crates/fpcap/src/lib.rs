//! Numerical solver for the binary fingerprinting capacity game under the
//! marking assumption.
//!
//! Fingerprinting capacity against coalitions of `k` pirates over a binary
//! alphabet is `1/k` times the value of a two-person zero-sum game: the code
//! designer mixes over a time-sharing bias `w`, the coalition answers with a
//! collusion channel `p`, and the payoff is the single-letter mutual
//! information `C(w, p)`. This crate computes the saddle point, the capacity,
//! closed-form bounds, and the named asymptotic strategies.
//!
//! - [`payoff`] — the payoff in entropy and KL form, with analytic derivatives
//! - [`attacks`] — interleaving attack, arcsine code distribution, capacity bounds
//! - [`solver`] — cutting-plane outer loop with a stationarity Newton polish,
//!   certified by the duality gap
//! - [`oracle`] — brute-force discretized game for small `k`, used as ground truth
//! - [`cli`] — solution documents (JSON/CSV), figure datasets, command surface
//!
//! See the `examples/` directory for runnable entry points covering each of
//! these, and the `fpcap` binary for the command-line interface.

pub mod attacks;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod payoff;
pub mod solver;

mod descent;
mod matrix_game;
mod scan;
pub mod util;

pub use error::{Error, Result};
pub use payoff::{
    binary_entropy, binomial_weights, kl_bernoulli, payoff, payoff_grad_p, payoff_grad_w,
    payoff_hess_w, payoff_kl_form, BinomialWeights, CoalitionSize, CodeDistribution,
    CollusionChannel, SupportAtom,
};
pub use solver::{
    best_response_p, best_response_w, solve_game, verify_solution, MethodTag, SaddleSolution,
    SolverOptions, VerificationReport,
};
