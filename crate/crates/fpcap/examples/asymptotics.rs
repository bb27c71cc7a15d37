//! Large-coalition trends: the scaled capacity `k^2 C`, the channel's
//! distance from the interleaving attack, and the Kolmogorov distance of the
//! time-sharing distribution from the arcsine law.
//!
//! ```text
//! cargo run --release -p fpcap --example asymptotics
//! ```

use fpcap::cli::arcsine_cdf;
use fpcap::{solve_game, CoalitionSize, SolverOptions};

fn main() {
    let target = 1.0 / (2.0 * std::f64::consts::LN_2);
    println!(
        "{:>3} {:>10} {:>16} {:>16}",
        "k", "k^2 C", "max|p*_z - z/k|", "KS(arcsine)"
    );
    for kk in 2..=10usize {
        let k = CoalitionSize::new(kk).unwrap();
        let sol = solve_game(k, &SolverOptions::default()).expect("solve");
        let deviation = sol
            .channel
            .probs()
            .iter()
            .enumerate()
            .map(|(z, &p)| (p - z as f64 / kk as f64).abs())
            .fold(0.0f64, f64::max);
        let ks = sol.distribution.kolmogorov_distance(arcsine_cdf);
        println!(
            "{:>3} {:>10.6} {:>16.6} {:>16.6}",
            kk,
            kk as f64 * kk as f64 * sol.capacity,
            deviation,
            ks
        );
    }
    println!("\nconjectured limit of k^2 C: 1/(2 ln 2) = {target:.6}");
}
