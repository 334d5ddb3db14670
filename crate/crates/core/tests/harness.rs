use std::fs;
use std::path::Path;

use matdisc::harness::run::{read_summary, read_trajectory, write_summary, write_trajectory};
use matdisc::harness::{parse_config, run_experiment, summarize, ExperimentConfig};
use matdisc::signer::{max_running_norm, Sign, TrajectoryRecord};
use matdisc::Error;

fn config_in(dir: &Path, body: &str) -> ExperimentConfig {
    let mut cfg = parse_config(body).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

const SMALL: &str = "
[experiment]
algorithm = mhc, random
T = 20n, 40n
trials = 3
seed = 42
trajectories = true
[ensemble]
kind = wigner_conditioned
n = 4, 6
[alpha]
policy = fixed
value = 0.2
";

#[test]
fn rows_follow_the_sweep_and_respect_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config_in(dir.path(), SMALL), Some(1)).unwrap();
    // 2 dimensions × 2 algorithms × 3 trials × 2 step counts
    assert_eq!(out.rows.len(), 24);
    for row in &out.rows {
        assert!(row.is_ok());
        assert!(row.max_running_norm >= row.final_norm && row.final_norm >= 0.0);
        assert_eq!(row.t, 20 * row.n * if row.t > 20 * row.n { 2 } else { 1 });
    }
    assert_eq!(read_summary(&out.summary_path).unwrap(), out.rows);
}

#[test]
fn trajectory_prefix_matches_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config_in(dir.path(), SMALL), None).unwrap();
    let traj = read_trajectory(&dir.path().join("trajectories/n4_r4_mhc_trial1.csv")).unwrap();
    assert_eq!(traj.len(), 160);
    let short = out
        .rows
        .iter()
        .find(|r| r.n == 4 && r.algorithm == "mhc" && r.trial == 1 && r.t == 80)
        .unwrap();
    assert_eq!(max_running_norm(&traj[..80]), short.max_running_norm);
    assert_eq!(traj[79].op_norm, short.final_norm);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config_in(a.path(), SMALL), Some(1)).unwrap();
    run_experiment(&config_in(b.path(), SMALL), Some(3)).unwrap();
    for name in [
        "summary.csv",
        "cells.csv",
        "trajectories/n6_r6_random_trial2.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn trials_are_paired_across_algorithms() {
    // every signer's first norm is ‖A_1‖, so equal first norms mean a shared first draw
    let body = SMALL.replace("mhc, random", "mhc, greedy");
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config_in(dir.path(), &body), None).unwrap();
    for trial in 0..3 {
        let m = read_trajectory(
            &dir.path()
                .join(format!("trajectories/n4_r4_mhc_trial{trial}.csv")),
        )
        .unwrap();
        let g = read_trajectory(
            &dir.path()
                .join(format!("trajectories/n4_r4_greedy_trial{trial}.csv")),
        )
        .unwrap();
        assert_eq!(m[0].op_norm, g[0].op_norm);
    }
}

#[test]
fn failed_trials_are_recorded_not_fatal() {
    let body = "
[experiment]
T = 10
trials = 2
[ensemble]
kind = wigner_conditioned
n = 32
sigma2 = 0.03125
max_rejections = 2
[alpha]
policy = fixed
value = 0.1
";
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config_in(dir.path(), body), None).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert!(out.rows.iter().all(|r| r.status.starts_with("error:")));
    let back = read_summary(&out.summary_path).unwrap();
    assert!(back[0].max_running_norm.is_nan());
    assert!(matches!(summarize(&out.summary_path), Ok(rep) if rep.groups[0].failed == 2));
}

#[test]
fn auto_alpha_is_measured_per_cell() {
    let body = "
[experiment]
T = 50
[ensemble]
kind = projection
n = 8
r = 2, 4
[alpha]
calibration_samples = 500
";
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config_in(dir.path(), body), None).unwrap();
    assert_eq!(out.cells.len(), 2);
    for cell in &out.cells {
        assert!(cell.eta.unwrap() > 0.0);
        assert!(cell.theta.unwrap() >= 1.0);
        assert!(*cell.alpha.as_ref().unwrap() > 0.0);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<TrajectoryRecord> = (1..=5)
        .map(|t| TrajectoryRecord {
            t,
            x: if t % 2 == 0 { Sign::Minus } else { Sign::Plus },
            op_norm: 1.0 / 3.0 + t as f64 * std::f64::consts::PI,
            log_potential: (t as f64).ln_1p() / 7.0,
        })
        .collect();
    let path = dir.path().join("traj.csv");
    write_trajectory(&path, &recs).unwrap();
    assert_eq!(read_trajectory(&path).unwrap(), recs);
    let header = fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("t,x,op_norm,log_potential\n"));

    let out = run_experiment(&config_in(dir.path(), SMALL), None).unwrap();
    let spath = dir.path().join("again.csv");
    write_summary(&spath, &out.rows).unwrap();
    assert_eq!(
        fs::read(&spath).unwrap(),
        fs::read(&out.summary_path).unwrap()
    );
}

#[test]
fn config_errors() {
    assert!(matches!(
        parse_config("n 8"),
        Err(Error::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_config("ensemble = goe\nn = 8\nT = 64\nbogus = 1"),
        Err(Error::Schema { key, .. }) if key == "bogus"
    ));
    assert!(matches!(
        parse_config("ensemble = goe\nn = 8\nT = 200, 100"),
        Err(Error::Schema { key, .. }) if key == "T"
    ));
    let cfg = parse_config("ensemble = goe\nn = 8\nT = 100, 200, 400").unwrap();
    assert_eq!(cfg.cells()[0].t_values, vec![100, 200, 400]);
}

#[test]
fn summarize_reports_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config_in(dir.path(), SMALL), None).unwrap();
    let rep = summarize(&out.summary_path).unwrap();
    assert_eq!(rep.groups.len(), 8);
    assert!(rep.slope(4, 4, "random").unwrap().is_finite());
    let empty = dir.path().join("empty.csv");
    write_summary(&empty, &[]).unwrap();
    assert!(matches!(summarize(&empty), Err(Error::EmptyData(_))));
}
