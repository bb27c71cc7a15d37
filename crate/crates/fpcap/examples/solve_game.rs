//! Solve one capacity game end to end and re-derive every certificate.
//!
//! ```text
//! cargo run --release -p fpcap --example solve_game -- 5
//! ```

use fpcap::{solve_game, verify_solution, CoalitionSize, SolverOptions};

fn main() {
    let kk: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("k must be an integer"))
        .unwrap_or(5);
    let k = CoalitionSize::new(kk).expect("k >= 1");
    let options = SolverOptions::default();

    let solution = solve_game(k, &options).expect("solver converges");
    println!("k = {kk}");
    println!("capacity        {:.16} bits", solution.capacity);
    println!("game value      {:.16}", solution.maxmin_value);
    println!("duality gap     {:.3e}", solution.gap);
    println!("kkt residual    {:.3e}", solution.kkt_residual);
    println!("method          {}", solution.method.as_str());
    println!("outer rounds    {}", solution.iterations);
    println!("channel p*_z:");
    for (z, p) in solution.channel.probs().iter().enumerate() {
        println!("  z = {z:>2}  {p:.12}");
    }
    println!("time-sharing support:");
    for atom in solution.distribution.atoms() {
        println!("  w = {:.12}  weight {:.12}", atom.w, atom.weight);
    }

    println!("\ncertificates:");
    print!("{}", verify_solution(&solution, &options));
}
