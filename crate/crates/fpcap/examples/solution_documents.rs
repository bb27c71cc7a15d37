//! Save a solution as a JSON document, read it back, and re-derive its
//! certificates. Documents use 17-significant-digit floats, so the
//! round-trip is bit-exact and verification residuals reproduce.
//!
//! ```text
//! cargo run --release -p fpcap --example solution_documents
//! ```

use fpcap::cli::SolutionDocument;
use fpcap::{solve_game, verify_solution, CoalitionSize, SolverOptions};

fn main() {
    let options = SolverOptions::default();
    let k = CoalitionSize::new(4).unwrap();
    let solution = solve_game(k, &options).expect("solver converges");

    let doc = SolutionDocument::from_solution(&solution, &options);
    let path = std::env::temp_dir().join("fpcap_k4_solution.json");
    std::fs::write(&path, doc.to_json()).expect("write document");
    println!("wrote {}", path.display());

    let parsed = SolutionDocument::from_json(&std::fs::read_to_string(&path).expect("read"))
        .expect("parse document");
    let (restored, restored_options) = parsed.to_solution().expect("structurally valid");
    assert_eq!(restored.capacity.to_bits(), solution.capacity.to_bits());
    assert_eq!(restored.channel.probs(), solution.channel.probs());
    println!("round-trip preserved every bit of the solution");

    let report = verify_solution(&restored, &restored_options);
    print!("{report}");
    assert!(report.passed());
    println!("all certificates reproduced from the saved document");
}
