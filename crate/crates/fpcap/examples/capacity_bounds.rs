//! Closed-form capacity bounds and the two named attack values.
//!
//! For every k the exact capacity is sandwiched as
//! `lower <= arcsine <= capacity <= interleaving <= upper`, where the outer
//! bounds are `2/(k^2 pi^2 ln 2)` and `1/(k^2 ln 2)`.
//!
//! ```text
//! cargo run --release -p fpcap --example capacity_bounds
//! ```

use fpcap::attacks::bounds_report;
use fpcap::{CoalitionSize, SolverOptions};

fn main() {
    let options = SolverOptions::default();
    println!(
        "{:>3} {:>12} {:>12} {:>12} {:>12}",
        "k", "lower", "arcsine", "interleaving", "upper"
    );
    for kk in 1..=10usize {
        let k = CoalitionSize::new(kk).unwrap();
        let report = bounds_report(k, 2049, 129, &options).expect("bounds");
        println!(
            "{:>3} {:>12.8} {:>12.8} {:>12.8} {:>12.8}",
            kk,
            report.lower_bound,
            report.arcsine_value,
            report.interleaving_value,
            report.upper_bound
        );
        assert!(report.lower_bound <= report.arcsine_value + 1e-9);
        assert!(report.arcsine_value <= report.interleaving_value);
        assert!(report.interleaving_value <= report.upper_bound + 1e-12);
    }
}
