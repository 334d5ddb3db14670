//! `matdisc` command line.
//!
//! Exit codes: 0 success, 1 failed verification or numerical error,
//! 2 usage, input or I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::load_config;
use super::matrix_file::load_matrix_sequence;
use super::run::run_experiment;
use super::summary::summarize_rows;
use super::verify::run_verification;
use crate::bounds::{
    chernoff_certificate, chernoff_gamma_search, goe_first_moment_report,
    goe_first_moment_threshold, heuristic_prediction,
};
use crate::ensembles::{EnsembleKind, EnsembleSpec, RngStream};
use crate::error::{Error, Result};
use crate::signer::exact_discrepancy;

#[derive(Parser, Debug)]
#[command(
    name = "matdisc",
    version,
    about = "Online matrix discrepancy workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every trial of a config and write CSV output.
    Run(RunArgs),
    /// Like `run`, then print the median table and growth slopes.
    Sweep(RunArgs),
    /// Run the built-in identity and inequality checks.
    Verify {
        #[arg(long, env = "MATDISC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate first-moment lower bounds.
    Bounds(BoundsArgs),
    /// Exact minimum-norm signing of a small matrix sequence.
    Discrepancy {
        file: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, env = "MATDISC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundsMode {
    Goe,
    Heuristic,
    Chernoff,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub mode: BoundsMode,
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(short = 'T')]
    pub t: usize,
    /// Rank parameter (heuristic, and rank-based ensembles).
    #[arg(short = 'r')]
    pub r: Option<usize>,
    /// Target for `E N_δ` in goe mode.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Threshold at which to report `log E N_δ`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Chernoff parameter; searched over a grid when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ensemble for chernoff mode.
    #[arg(long, default_value = "goe")]
    pub ensemble: String,
    /// Monte Carlo replications for chernoff mode.
    #[arg(long, default_value_t = 200)]
    pub mc: usize,
    #[arg(long, env = "MATDISC_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Schema { .. }
        | Error::InvalidInput(_)
        | Error::InvalidDimension(_)
        | Error::InvalidMatrix(_)
        | Error::InstanceTooLarge(_)
        | Error::EmptyData(_)
        | Error::Io { .. }
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}"))),
    }
}

fn cmd_run(args: &RunArgs, print_summary: bool) -> Result<i32> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.n_trials = trials;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    let output = run_experiment(&config, args.threads)?;
    let failed = output.rows.iter().filter(|r| !r.is_ok()).count();
    println!("summary: {}", output.summary_path.display());
    println!("rows: {} ({failed} failed)", output.rows.len());
    for cell in &output.cells {
        match &cell.alpha {
            Ok(a) => println!("n={} r={} alpha={a:.6}", cell.n, cell.r),
            Err(e) => println!("n={} r={} alpha unavailable: {e}", cell.n, cell.r),
        }
    }
    if print_summary {
        let ok: Vec<_> = output.rows.iter().filter(|r| r.is_ok()).cloned().collect();
        match summarize_rows(&ok) {
            Ok(report) => print!("\n{report}"),
            Err(e) => eprintln!("no summary: {e}"),
        }
    }
    Ok(0)
}

fn cmd_verify(seed: u64, threads: Option<usize>) -> Result<i32> {
    let checks = with_threads(threads, || run_verification(seed))??;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn bounds_spec(args: &BoundsArgs) -> Result<EnsembleSpec> {
    let kind: EnsembleKind = args.ensemble.parse()?;
    let rank = || {
        args.r
            .ok_or_else(|| Error::InvalidInput(format!("-r is required for {kind}")))
    };
    Ok(match kind {
        EnsembleKind::Goe => EnsembleSpec::goe(args.n),
        EnsembleKind::WignerConditioned => EnsembleSpec::wigner_conditioned(args.n),
        EnsembleKind::WishartNormalized => EnsembleSpec::wishart_normalized(args.n, rank()?),
        EnsembleKind::Projection => EnsembleSpec::projection(args.n, rank()?),
        EnsembleKind::RademacherRankOne => EnsembleSpec::rademacher_rank_one(args.n),
    })
}

fn cmd_bounds(args: &BoundsArgs) -> Result<i32> {
    match args.mode {
        BoundsMode::Goe => {
            let delta_max = goe_first_moment_threshold(args.n, args.t, args.epsilon)?;
            println!("delta_max {delta_max:.10e}");
            if let Some(delta) = args.delta {
                let rep = goe_first_moment_report(args.n, args.t, delta)?;
                println!("log_first_moment {:.10e}", rep.log_first_moment);
                println!("verdict {}", rep.verdict);
            }
        }
        BoundsMode::Heuristic => {
            let r = args.r.unwrap_or(args.n);
            println!(
                "prediction {:.10e}",
                heuristic_prediction(args.n, r, args.t)?
            );
        }
        BoundsMode::Chernoff => {
            let delta = args.delta.ok_or_else(|| {
                Error::InvalidInput("--delta is required in chernoff mode".into())
            })?;
            let spec = bounds_spec(args)?;
            let stream = RngStream::new(args.seed);
            let rep = match args.gamma {
                Some(g) => chernoff_certificate(&spec, args.t, delta, g, args.mc, &stream)?,
                None => chernoff_gamma_search(&spec, args.t, delta, None, args.mc, &stream)?,
            };
            println!("log_first_moment {:.10e}", rep.log_first_moment);
            println!("stderr {:.3e}", rep.stderr);
            if let Some(g) = rep.gamma {
                println!("gamma {g:.6e}");
            }
            println!("verdict {}", rep.verdict);
        }
    }
    Ok(0)
}

fn cmd_discrepancy(file: &Path, threads: Option<usize>) -> Result<i32> {
    let mats = load_matrix_sequence(file)?;
    let (delta, signs) = with_threads(threads, || exact_discrepancy(&mats))??;
    println!("{delta}");
    let signs: Vec<String> = signs.iter().map(|s| s.as_i8().to_string()).collect();
    println!("{}", signs.join(" "));
    Ok(0)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_run(args, true),
        Command::Verify { seed, threads } => cmd_verify(*seed, *threads),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Discrepancy { file, threads } => cmd_discrepancy(file, *threads),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
