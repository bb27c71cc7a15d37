//! Solve the capacity game for a range of coalition sizes and print the
//! certified values next to the closed-form bounds.
//!
//! ```text
//! cargo run --release -p fpcap --example capacity_sweep
//! ```

use std::time::Instant;

use fpcap::attacks::{lower_bound, upper_bound};
use fpcap::{solve_game, CoalitionSize, SolverOptions};

fn main() {
    let options = SolverOptions::default();
    println!(
        "{:>3} {:>22} {:>12} {:>12} {:>10} {:>9} {:>7} {:>8}",
        "k", "capacity", "lower", "upper", "gap", "kkt", "atoms", "time"
    );
    for kk in 1..=10 {
        let k = CoalitionSize::new(kk).unwrap();
        let start = Instant::now();
        match solve_game(k, &options) {
            Ok(sol) => println!(
                "{:>3} {:>22.16} {:>12.6} {:>12.6} {:>10.2e} {:>9.1e} {:>7} {:>8.2?}",
                kk,
                sol.capacity,
                lower_bound(k),
                upper_bound(k),
                sol.gap,
                sol.kkt_residual,
                sol.distribution.len(),
                start.elapsed()
            ),
            Err(e) => println!("{kk:>3} failed: {e}"),
        }
    }
}
