use std::path::PathBuf;
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use fpcap::cli::{
    cmd_bounds, cmd_figures, cmd_solve, cmd_verify, BoundsConfig, FiguresConfig, OutputFormat,
    SolveConfig, EXIT_USAGE,
};
use fpcap::solver::SolverOptions;

#[derive(Parser)]
#[command(
    name = "fpcap",
    version,
    about = "Binary fingerprinting capacity: saddle-point solver, bounds, and figure data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the capacity game for one coalition size
    Solve {
        /// Coalition size k >= 1
        k: usize,
        /// Duality-gap target (game-value scale)
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Dense grid size for scans over w
        #[arg(long, default_value_t = 2049)]
        grid: usize,
        /// Disable the Newton stationarity polish
        #[arg(long)]
        no_newton: bool,
        /// Seed for deterministic restarts
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Capacity bounds and attack values per coalition size
    Bounds {
        /// Single coalition size (alternative to --k-range)
        k: Option<usize>,
        /// Inclusive range A:B of coalition sizes
        #[arg(long)]
        k_range: Option<String>,
        #[arg(long, default_value_t = 2049)]
        grid: usize,
        /// Arcsine quadrature nodes (doubled until stable)
        #[arg(long, default_value_t = 129)]
        quad_nodes: usize,
        /// Worker threads (default: FPCAP_JOBS, then all cores)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit figure datasets as CSV files
    Figures {
        /// Which dataset: 1 capacity/bounds, 2 channel deviation, 3 CDFs
        #[arg(long)]
        which: u8,
        /// Comma-separated coalition sizes
        #[arg(long, default_value = "2,3,4,5,6,7,8,9,10")]
        k_list: String,
        /// Output directory
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        /// Permit k above the slow threshold (expect minutes per solve)
        #[arg(long)]
        allow_slow: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-derive all certificates for a saved solution document
    Verify {
        /// Solution document (JSON) to check
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
}

fn parse_k_range(spec: &str) -> Option<Vec<usize>> {
    let (a, b) = spec.split_once(':')?;
    let a: usize = a.trim().parse().ok()?;
    let b: usize = b.trim().parse().ok()?;
    if a == 0 || b < a {
        return None;
    }
    Some((a..=b).collect())
}

fn parse_k_list(spec: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let k: usize = part.trim().parse().ok()?;
        if k == 0 {
            return None;
        }
        out.push(k);
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            exit(EXIT_USAGE);
        }
    };

    let code = match cli.command {
        Command::Solve {
            k,
            tol,
            grid,
            no_newton,
            seed,
            out,
            format,
        } => cmd_solve(&SolveConfig {
            k,
            options: SolverOptions {
                tolerance: tol,
                w_grid: grid,
                newton_enabled: !no_newton,
                seed,
                ..SolverOptions::default()
            },
            out,
            format: match format {
                Format::Json => OutputFormat::Json,
                Format::Csv => OutputFormat::Csv,
            },
        }),
        Command::Bounds {
            k,
            k_range,
            grid,
            quad_nodes,
            jobs,
            out,
        } => {
            let ks = match (k, k_range) {
                (Some(k), None) => Some(vec![k]),
                (None, Some(spec)) => parse_k_range(&spec),
                _ => None,
            };
            match ks {
                Some(ks) if !ks.is_empty() && ks.iter().all(|&k| k >= 1) => cmd_bounds(&BoundsConfig {
                    ks,
                    w_grid: grid,
                    quad_nodes,
                    jobs,
                    out,
                }),
                _ => {
                    eprintln!("error: pass either a single k or --k-range A:B with 1 <= A <= B");
                    EXIT_USAGE
                }
            }
        }
        Command::Figures {
            which,
            k_list,
            out,
            allow_slow,
            jobs,
            tol,
            seed,
        } => match parse_k_list(&k_list) {
            Some(k_list) => cmd_figures(&FiguresConfig {
                which,
                k_list,
                out_dir: out,
                allow_slow,
                jobs,
                options: SolverOptions {
                    tolerance: tol,
                    seed,
                    ..SolverOptions::default()
                },
            }),
            None => {
                eprintln!("error: --k-list must be comma-separated integers >= 1");
                EXIT_USAGE
            }
        },
        Command::Verify { input } => cmd_verify(&input),
    };
    exit(code);
}
