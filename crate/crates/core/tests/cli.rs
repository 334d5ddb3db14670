use std::fs;
use std::process::{Command, Output};

fn matdisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matdisc"))
        .args(args)
        .env_remove("MATDISC_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_passes() {
    let out = matdisc(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn bounds_goe_prints_positive_threshold() {
    let out = matdisc(&[
        "bounds",
        "--mode",
        "goe",
        "-n",
        "16",
        "-T",
        "256",
        "--epsilon",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("delta_max "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(value > 0.0);
}

#[test]
fn bounds_heuristic_and_chernoff() {
    let out = matdisc(&["bounds", "--mode", "heuristic", "-n", "8", "-T", "64"]);
    assert!(
        stdout(&out).contains("prediction 2.0000000000e0"),
        "{}",
        stdout(&out)
    );
    let out = matdisc(&[
        "bounds",
        "--mode",
        "chernoff",
        "--ensemble",
        "projection",
        "-n",
        "6",
        "-r",
        "2",
        "-T",
        "8",
        "--delta",
        "0.2",
        "--gamma",
        "0",
        "--mc",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("verdict inconclusive"));
    let missing = matdisc(&["bounds", "--mode", "chernoff", "-n", "6", "-T", "8"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn discrepancy_of_duplicate_pair_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.txt");
    fs::write(
        &path,
        "2 2\n0.5 0.25\n0.25 -0.125\n\n0.5 0.25\n0.25 -0.125\n",
    )
    .unwrap();
    let out = matdisc(&["discrepancy", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("0"));
    assert_eq!(lines.next(), Some("1 -1"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(matdisc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(matdisc(&[]).status.code(), Some(2));
    assert_eq!(
        matdisc(&["run", "/nonexistent/config.cfg"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "ensemble = goe\nn 8\n").unwrap();
    let out = matdisc(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn seed_flag_and_env_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(
        &cfg,
        "[experiment]\nT = 40\nseed = 1\n[ensemble]\nkind = wigner_conditioned\nn = 5\n[alpha]\npolicy = fixed\nvalue = 0.3\n",
    )
    .unwrap();
    let run = |out: &str, seed_flag: Option<&str>, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_matdisc"));
        cmd.args(["run", cfg.to_str().unwrap(), "--out", out]);
        cmd.env_remove("MATDISC_SEED");
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("MATDISC_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(dir.path().join(out).join("summary.csv")).unwrap()
    };
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let base = run(&out("a"), None, None);
    let flag = run(&out("b"), Some("9"), None);
    let env = run(&out("c"), None, Some("9"));
    assert_ne!(base, flag);
    assert_eq!(flag, env);
}

#[test]
fn sweep_prints_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "[experiment]\nalgorithm = random\nT = 10n, 20n\ntrials = 2\n[ensemble]\nkind = projection\nn = 6\nr = 2\n[alpha]\npolicy = fixed\nvalue = 0.5\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = matdisc(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("slope_vs_T"));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2);
}
