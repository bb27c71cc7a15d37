//! Cross-validate the saddle solver against the brute-force discretized
//! game for small coalitions.
//!
//! ```text
//! cargo run --release -p fpcap --example oracle_crosscheck
//! ```

use std::time::Instant;

use fpcap::oracle::{oracle_solve, OracleOptions};
use fpcap::{solve_game, CoalitionSize, SolverOptions};

fn main() {
    for kk in 1..=3usize {
        let k = CoalitionSize::new(kk).unwrap();
        let sol = solve_game(k, &SolverOptions::default()).expect("solve");
        let start = Instant::now();
        let oracle = oracle_solve(k, &OracleOptions::default()).expect("oracle");
        println!(
            "k = {kk}: solver {:.10}  oracle {:.10}  |diff| {:.2e}  oracle gap {:.2e}  rounds {}  ({:.2?})",
            sol.capacity,
            oracle.capacity,
            (sol.capacity - oracle.capacity).abs(),
            oracle.gap,
            oracle.rounds,
            start.elapsed()
        );
        println!("  oracle channel {:?}", oracle.channel.probs());
        println!("  oracle w-mix   {:?}", oracle.w_strategy);
    }
}
