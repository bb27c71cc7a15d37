//! The arcsine time-sharing density `1/(pi sqrt(w(1-w)))`: its quadrature
//! rule and the guaranteed rate it achieves against the worst channel.
//!
//! ```text
//! cargo run --release -p fpcap --example arcsine_code
//! ```

use fpcap::attacks::{arcsine_quadrature, arcsine_value, lower_bound};
use fpcap::{CoalitionSize, SolverOptions};

fn main() {
    // the rule integrates polynomials of degree < 2n exactly
    let q = arcsine_quadrature(5).expect("nodes >= 1");
    println!("5-node rule (w, weight):");
    for (w, weight) in q.nodes() {
        println!("  ({w:.12}, {weight:.3})");
    }
    println!("integral of 1        = {:.15}", q.integrate(|_| 1.0));
    println!("integral of w        = {:.15}", q.integrate(|w| w));
    println!("integral of w^2      = {:.15}  (exact: 0.375)", q.integrate(|w| w * w));
    println!(
        "integral of w^3      = {:.15}  (exact: 0.3125)",
        q.integrate(|w| w * w * w)
    );

    // rate guaranteed by the arcsine code against the best coalition response
    let options = SolverOptions::default();
    let q = arcsine_quadrature(1025).expect("nodes");
    println!("\n{:>3} {:>14} {:>14} {:>8}", "k", "arcsine value", "lower bound", "ratio");
    for kk in [2usize, 3, 5, 8, 13, 21] {
        let k = CoalitionSize::new(kk).unwrap();
        let (value, channel) = arcsine_value(k, &q, &options).expect("descent converges");
        assert!(channel.symmetry_residual() < 1e-9);
        println!(
            "{:>3} {:>14.9} {:>14.9} {:>8.4}",
            kk,
            value,
            lower_bound(k),
            value / lower_bound(k)
        );
    }
    println!("\nthe ratio approaches pi^2/4 = {:.4} for large k", std::f64::consts::PI.powi(2) / 4.0);
}
