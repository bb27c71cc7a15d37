//! Command implementations behind the `fpcap` binary.
//!
//! Exit-code contract (stable): 0 success / all checks passed, 1 usage or
//! input error, 2 non-convergence, failed verification, or partial output.
//! Sweeps over `k` run on a worker pool sized by `--jobs` (fallback: the
//! `FPCAP_JOBS` environment variable, then the available parallelism);
//! output rows are always written in `k` order.

pub mod document;

pub use document::{DocumentAtom, OptionsEcho, SolutionDocument, SCHEMA_VERSION};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::attacks;
use crate::error::Error;
use crate::payoff::CoalitionSize;
use crate::solver::{solve_game, verify_solution, SaddleSolution, SolverOptions};
use document::fmt_f64;

/// Coalition sizes above this need `--allow-slow` in `figures` (the solve
/// time grows quickly with the support size).
pub const SLOW_K_THRESHOLD: usize = 12;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Worker count: explicit request, then `FPCAP_JOBS`, then the machine.
pub fn effective_jobs(requested: Option<usize>) -> usize {
    if let Some(j) = requested {
        return j.max(1);
    }
    if let Ok(v) = std::env::var("FPCAP_JOBS") {
        if let Ok(j) = v.parse::<usize>() {
            return j.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Order-preserving parallel map over a slice.
fn parallel_map<K: Sync, T: Send>(
    jobs: usize,
    items: &[K],
    f: impl Fn(&K) -> T + Sync,
) -> Vec<T> {
    let n = items.len();
    if jobs <= 1 || n <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(&items[i]);
                slots.lock().expect("worker poisoned")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

fn write_output(path: Option<&Path>, content: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub k: usize,
    pub options: SolverOptions,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// `fpcap solve`: solve one game and write the solution document.
pub fn cmd_solve(cfg: &SolveConfig) -> i32 {
    let k = match CoalitionSize::new(cfg.k) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = cfg.options.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let (solution, exit) = match solve_game(k, &cfg.options) {
        Ok(sol) => (sol, EXIT_OK),
        Err(Error::SolverNotConverged { lower, upper, best }) => {
            eprintln!(
                "warning: gap target not reached; best capacity bracket [{}, {}]",
                fmt_f64(lower),
                fmt_f64(upper)
            );
            (*best, EXIT_INCOMPLETE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let doc = SolutionDocument::from_solution(&solution, &cfg.options);
    let content = match cfg.format {
        OutputFormat::Json => doc.to_json(),
        OutputFormat::Csv => doc.to_csv(),
    };
    if let Err(e) = write_output(cfg.out.as_deref(), &content) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    exit
}

#[derive(Debug, Clone)]
pub struct BoundsConfig {
    pub ks: Vec<usize>,
    pub w_grid: usize,
    pub quad_nodes: usize,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

/// `fpcap bounds`: closed-form bounds and attack values per coalition size.
pub fn cmd_bounds(cfg: &BoundsConfig) -> i32 {
    if cfg.ks.is_empty() || cfg.ks.iter().any(|&k| k == 0) {
        eprintln!("error: need at least one coalition size k >= 1");
        return EXIT_USAGE;
    }
    let jobs = effective_jobs(cfg.jobs);
    let options = SolverOptions::default();
    let rows = parallel_map(jobs, &cfg.ks, |&kk| {
        let k = CoalitionSize::new(kk).expect("validated above");
        attacks::bounds_report(k, cfg.w_grid, cfg.quad_nodes, &options)
    });
    let mut csv = String::from("k,lower_bound,upper_bound,interleaving_value,arcsine_value\n");
    let mut failures = 0;
    for row in rows {
        match row {
            Ok(r) => csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.k,
                fmt_f64(r.lower_bound),
                fmt_f64(r.upper_bound),
                fmt_f64(r.interleaving_value),
                fmt_f64(r.arcsine_value)
            )),
            Err(e) => {
                eprintln!("warning: {e}");
                failures += 1;
            }
        }
    }
    if let Err(e) = write_output(cfg.out.as_deref(), &csv) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    if failures > 0 {
        EXIT_INCOMPLETE
    } else {
        EXIT_OK
    }
}

#[derive(Debug, Clone)]
pub struct FiguresConfig {
    pub which: u8,
    pub k_list: Vec<usize>,
    pub out_dir: PathBuf,
    pub allow_slow: bool,
    pub jobs: Option<usize>,
    pub options: SolverOptions,
}

/// `fpcap figures`: emit the datasets behind the three standard plots.
///
/// 1. capacity with upper/lower bounds and the conjectured `1/(2 k^2 ln 2)`
/// 2. channel deviation from the interleaving attack, `p*_z - z/k`
/// 3. CDF of the optimal time-sharing distribution vs the arcsine CDF
pub fn cmd_figures(cfg: &FiguresConfig) -> i32 {
    if !(1..=3).contains(&cfg.which) {
        eprintln!("error: --which must be 1, 2, or 3");
        return EXIT_USAGE;
    }
    if cfg.k_list.is_empty() || cfg.k_list.iter().any(|&k| k == 0) {
        eprintln!("error: need coalition sizes k >= 1");
        return EXIT_USAGE;
    }
    if !cfg.allow_slow {
        if let Some(&big) = cfg.k_list.iter().find(|&&k| k > SLOW_K_THRESHOLD) {
            eprintln!(
                "error: k = {big} exceeds {SLOW_K_THRESHOLD}; pass --allow-slow \
                 (expect minutes per solve at that size)"
            );
            return EXIT_USAGE;
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("error: cannot create {}: {e}", cfg.out_dir.display());
        return EXIT_USAGE;
    }

    let jobs = effective_jobs(cfg.jobs);
    let solves = parallel_map(jobs, &cfg.k_list, |&kk| {
        let k = CoalitionSize::new(kk).expect("validated above");
        solve_game(k, &cfg.options)
    });

    let mut failures = 0usize;
    let mut solved: Vec<(usize, SaddleSolution)> = Vec::new();
    for (&kk, result) in cfg.k_list.iter().zip(solves) {
        match result {
            Ok(sol) => solved.push((kk, sol)),
            Err(e) => {
                eprintln!("warning: k = {kk} not solved: {e}");
                failures += 1;
            }
        }
    }

    let io_result = match cfg.which {
        1 => emit_fig1(&cfg.out_dir, &solved),
        2 => emit_fig2(&cfg.out_dir, &solved),
        _ => emit_fig3(&cfg.out_dir, &solved),
    };
    if let Err(e) = io_result {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    if failures > 0 {
        EXIT_INCOMPLETE
    } else {
        EXIT_OK
    }
}

fn emit_fig1(dir: &Path, solved: &[(usize, SaddleSolution)]) -> std::io::Result<()> {
    let mut csv = String::from("k,capacity,lower,upper,conjectured\n");
    for (kk, sol) in solved {
        let k = sol.k;
        let conjectured = 1.0 / (*kk as f64 * *kk as f64 * 2.0 * std::f64::consts::LN_2);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            kk,
            fmt_f64(sol.capacity),
            fmt_f64(attacks::lower_bound(k)),
            fmt_f64(attacks::upper_bound(k)),
            fmt_f64(conjectured)
        ));
    }
    std::fs::write(dir.join("fig1.csv"), csv)
}

fn emit_fig2(dir: &Path, solved: &[(usize, SaddleSolution)]) -> std::io::Result<()> {
    for (kk, sol) in solved {
        let mut csv = String::from("z,deviation\n");
        for (z, &p) in sol.channel.probs().iter().enumerate() {
            let interleaving = z as f64 / *kk as f64;
            csv.push_str(&format!("{},{}\n", z, fmt_f64(p - interleaving)));
        }
        std::fs::write(dir.join(format!("fig2_k{kk}.csv")), csv)?;
    }
    Ok(())
}

/// Arcsine CDF `(2/pi) asin(sqrt(w))`.
pub fn arcsine_cdf(w: f64) -> f64 {
    (2.0 / std::f64::consts::PI) * w.clamp(0.0, 1.0).sqrt().asin()
}

fn emit_fig3(dir: &Path, solved: &[(usize, SaddleSolution)]) -> std::io::Result<()> {
    for (kk, sol) in solved {
        let mut csv = String::from("w,cdf_solution,cdf_arcsine\n");
        for i in 0..=1000usize {
            let w = i as f64 / 1000.0;
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(w),
                fmt_f64(sol.distribution.cdf(w)),
                fmt_f64(arcsine_cdf(w))
            ));
        }
        std::fs::write(dir.join(format!("fig3_k{kk}.csv")), csv)?;
    }
    Ok(())
}

/// `fpcap verify`: re-derive every certificate for a saved document.
pub fn cmd_verify(input: &Path) -> i32 {
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", input.display());
            return EXIT_USAGE;
        }
    };
    let doc = match SolutionDocument::from_json(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let (solution, options) = match doc.to_solution() {
        Ok(pair) => pair,
        Err(e) => {
            // parseable but structurally invalid: report as a failed check
            println!("structural            FAIL  {e}");
            return EXIT_INCOMPLETE;
        }
    };
    let report = verify_solution(&solution, &options);
    print!("{report}");
    if report.passed() {
        println!("all checks passed (k = {}, gap tolerance {})", doc.k, options.tolerance);
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    }
}
