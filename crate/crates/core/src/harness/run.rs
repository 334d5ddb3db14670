//! Seeded experiment execution and CSV persistence.
//!
//! Every `(cell, algorithm, trial)` task runs one trajectory at the largest
//! `T` of its sweep; shorter `T` values are read off as prefixes, which is
//! exact because draw `t` is addressed by its index. Trial `k` uses
//! `RngStream(master_seed) / k` for every algorithm, so algorithms compared
//! within a trial see the same matrices.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{AlphaConfig, Cell, ExperimentConfig};
use crate::diagnostics::{estimate_maci, estimate_unbiasedness, DirectionPolicy};
use crate::ensembles::{EnsembleSpec, RngStream, CALIBRATION};
use crate::error::{Error, Result};
use crate::signer::{run_stream, Algorithm, AlphaPolicy, TrajectoryRecord};

pub const SUMMARY_HEADER: [&str; 9] = [
    "n",
    "r",
    "T",
    "algorithm",
    "trial",
    "max_running_norm",
    "final_norm",
    "ratio_to_theory",
    "status",
];

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "x", "op_norm", "log_potential"];

pub const CELLS_HEADER: [&str; 6] = ["n", "r", "alpha", "eta", "theta", "status"];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub r: usize,
    pub t: usize,
    pub algorithm: String,
    pub trial: usize,
    pub max_running_norm: f64,
    pub final_norm: f64,
    /// `max_running_norm / (√(rn) · log(T + n))`.
    pub ratio_to_theory: f64,
    /// `ok`, or the error that stopped the trial.
    pub status: String,
}

impl SummaryRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// `√(rn) · log(T + n)`.
pub fn theory_scale(n: usize, r: usize, t: usize) -> f64 {
    ((r * n) as f64).sqrt() * ((t + n) as f64).ln()
}

/// Signing constants for one sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellAlpha {
    pub n: usize,
    pub r: usize,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub alpha: Result<f64, String>,
}

/// Stream reserved for measuring constants of one cell; never a trial address.
pub fn calibration_stream(master_seed: u64, spec: &EnsembleSpec) -> RngStream {
    RngStream::new(master_seed)
        .child(CALIBRATION)
        .child(spec.n as u64)
        .child(spec.rank() as u64)
}

/// Resolves `α` for `spec`, measuring `η` (at prescale `n/√r`) and `θ` when not given.
pub fn resolve_alpha(config: &AlphaConfig, spec: &EnsembleSpec, master_seed: u64) -> CellAlpha {
    let (n, r) = (spec.n, spec.rank());
    let mut out = CellAlpha {
        n,
        r,
        eta: None,
        theta: None,
        alpha: Err(String::new()),
    };
    let result: Result<f64> = (|| match *config {
        AlphaConfig::Fixed(v) => AlphaPolicy::Fixed(v).resolve(r, n),
        AlphaConfig::Auto {
            eta,
            theta,
            calibration_samples,
        } => {
            let stream = calibration_stream(master_seed, spec);
            let eta = match eta {
                Some(v) => v,
                None => {
                    let prescale = n as f64 / (r as f64).sqrt();
                    estimate_maci(
                        spec,
                        prescale,
                        DirectionPolicy::default(),
                        calibration_samples,
                        &stream,
                    )?
                    .eta_hat
                }
            };
            out.eta = Some(eta);
            let theta = match theta {
                Some(v) => v,
                // ‖E P‖ ≥ Tr(E P)/n = r/n, so θ ≥ 1 always
                None => estimate_unbiasedness(spec, calibration_samples, &stream.child(1))?
                    .theta_hat
                    .max(1.0),
            };
            out.theta = Some(theta);
            AlphaPolicy::Auto { eta, theta }.resolve(r, n)
        }
    })();
    out.alpha = result.map_err(|e| e.to_string());
    out
}

/// Paths and rows produced by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub output_dir: PathBuf,
    pub summary_path: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub cells: Vec<CellAlpha>,
}

struct Task {
    cell: usize,
    algorithm: Algorithm,
    trial: usize,
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))
}

/// Runs every trial of `config` and writes CSV outputs under its `output_dir`.
///
/// `threads` sizes the worker pool; results do not depend on it.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let cells = config.cells();
    let pool = build_pool(threads)?;

    let alphas: Vec<CellAlpha> = pool.install(|| {
        cells
            .iter()
            .map(|c| resolve_alpha(&config.alpha, &c.spec, config.master_seed))
            .collect()
    });

    let mut tasks = Vec::new();
    for (ci, _) in cells.iter().enumerate() {
        for &algorithm in &config.algorithms {
            for trial in 0..config.n_trials {
                tasks.push(Task {
                    cell: ci,
                    algorithm,
                    trial,
                });
            }
        }
    }

    let root = RngStream::new(config.master_seed);
    let results: Vec<Result<Vec<TrajectoryRecord>, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let cell: &Cell = &cells[task.cell];
                let alpha = alphas[task.cell].alpha.clone()?;
                let t_max = *cell.t_values.last().expect("validated non-empty");
                run_stream(
                    &cell.spec,
                    task.algorithm,
                    t_max,
                    AlphaPolicy::Fixed(alpha),
                    &root.child(task.trial as u64),
                )
                .map_err(|e| e.to_string())
            })
            .collect()
    });

    let out_dir = config.output_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let traj_dir = out_dir.join("trajectories");
    if config.write_trajectories {
        fs::create_dir_all(&traj_dir).map_err(|e| Error::io(&traj_dir, e))?;
    }

    let mut rows = Vec::new();
    for (task, result) in tasks.iter().zip(&results) {
        let cell = &cells[task.cell];
        let (n, r) = (cell.spec.n, cell.spec.rank());
        match result {
            Ok(records) => {
                if config.write_trajectories {
                    let name = format!("n{n}_r{r}_{}_trial{}.csv", task.algorithm, task.trial);
                    write_trajectory(&traj_dir.join(name), records)?;
                }
                let mut running = 0.0f64;
                let mut k = 0;
                for &t in &cell.t_values {
                    while k < t {
                        running = running.max(records[k].op_norm);
                        k += 1;
                    }
                    rows.push(SummaryRow {
                        n,
                        r,
                        t,
                        algorithm: task.algorithm.to_string(),
                        trial: task.trial,
                        max_running_norm: running,
                        final_norm: records[t - 1].op_norm,
                        ratio_to_theory: running / theory_scale(n, r, t),
                        status: "ok".into(),
                    });
                }
            }
            Err(msg) => {
                for &t in &cell.t_values {
                    rows.push(SummaryRow {
                        n,
                        r,
                        t,
                        algorithm: task.algorithm.to_string(),
                        trial: task.trial,
                        max_running_norm: f64::NAN,
                        final_norm: f64::NAN,
                        ratio_to_theory: f64::NAN,
                        status: format!("error: {msg}"),
                    });
                }
            }
        }
    }

    let summary_path = out_dir.join("summary.csv");
    write_summary(&summary_path, &rows)?;
    write_cells(&out_dir.join("cells.csv"), &alphas)?;
    write_metadata(&out_dir.join("metadata.txt"), config, threads)?;
    Ok(RunOutput {
        output_dir: out_dir,
        summary_path,
        rows,
        cells: alphas,
    })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for rec in records {
        w.write_record([
            rec.t.to_string(),
            rec.x.as_i8().to_string(),
            fmt_f64(rec.op_norm),
            fmt_f64(rec.log_potential),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record([
            row.n.to_string(),
            row.r.to_string(),
            row.t.to_string(),
            row.algorithm.clone(),
            row.trial.to_string(),
            fmt_f64(row.max_running_norm),
            fmt_f64(row.final_norm),
            fmt_f64(row.ratio_to_theory),
            row.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_cells(path: &Path, cells: &[CellAlpha]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CELLS_HEADER)?;
    for c in cells {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let (alpha, status) = match &c.alpha {
            Ok(a) => (fmt_f64(*a), "ok".to_string()),
            Err(msg) => (String::new(), format!("error: {msg}")),
        };
        w.write_record([
            c.n.to_string(),
            c.r.to_string(),
            alpha,
            opt(c.eta),
            opt(c.theta),
            status,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_metadata(path: &Path, config: &ExperimentConfig, threads: Option<usize>) -> Result<()> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let text = format!(
        "id = {}\nmaster_seed = {}\nthreads = {}\ncreated_unix = {}\nversion = {}\n",
        config.id,
        config.master_seed,
        threads
            .map(|t| t.to_string())
            .unwrap_or_else(|| "default".into()),
        now,
        env!("CARGO_PKG_VERSION"),
    );
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in summary")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("bad integer `{s}` in summary")))
}

/// Reads a `summary.csv` written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(SUMMARY_HEADER.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "unexpected summary header in {}",
            path.display()
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                n: parse_usize(&rec[0])?,
                r: parse_usize(&rec[1])?,
                t: parse_usize(&rec[2])?,
                algorithm: rec[3].to_string(),
                trial: parse_usize(&rec[4])?,
                max_running_norm: parse_f64(&rec[5])?,
                final_norm: parse_f64(&rec[6])?,
                ratio_to_theory: parse_f64(&rec[7])?,
                status: rec[8].to_string(),
            })
        })
        .collect()
}

/// Reads a trajectory CSV written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    use crate::signer::Sign;
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let x = match &rec[1] {
                "1" => Sign::Plus,
                "-1" => Sign::Minus,
                other => return Err(Error::InvalidInput(format!("bad sign `{other}`"))),
            };
            Ok(TrajectoryRecord {
                t: parse_usize(&rec[0])?,
                x,
                op_norm: parse_f64(&rec[2])?,
                log_potential: parse_f64(&rec[3])?,
            })
        })
        .collect()
}
