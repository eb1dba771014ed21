//! Runs the `entlab` binary and inspects exit codes and reports.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn entlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("ENTLAB_OUT_DIR")
        .env_remove("ENTLAB_THREADS")
        .output()
        .unwrap()
}

fn report(out: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap())
        .unwrap()
}

#[test]
fn half_chain_region_has_area_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = entlab(
        &[
            "lattice-info",
            "--L",
            "10",
            "--region",
            "0..4",
            "--triples",
            "500",
            "--regions",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "lattice-info");
    assert_eq!(r["status"], "clean");
    assert_eq!(r["result"]["area"], 2);
    assert_eq!(r["result"]["boundary_in"], serde_json::json!([0, 3]));
    assert_eq!(r["result"]["boundary_out"], serde_json::json!([4, 9]));
    assert!(dir.path().join("lattice-info.profile.csv").exists());
}

#[test]
fn report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = entlab(
        &["filter-build", "--delta", "0.5", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "filter-build");
    assert_eq!(r["schema"], "entlab.report/1");
    assert_eq!(r["seed"], 3);
    assert_eq!(r["config"]["delta"], 0.5);
    for key in ["checks", "violations", "soft_flags", "artifacts", "result"] {
        assert!(!r[key].is_null(), "missing {key}");
    }
    let check = &r["checks"][0];
    for key in [
        "name", "value", "relation", "bound", "margin", "holds", "hard",
    ] {
        assert!(!check[key].is_null(), "check lacks {key}");
    }
    // Timing lives in the sidecar only.
    let meta: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("filter-build.meta.json")).unwrap(),
    )
    .unwrap();
    assert!(meta["elapsed_seconds"].is_number());
    assert!(r.get("elapsed_seconds").is_none());
}

#[test]
fn violated_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = entlab(
        &[
            "qa-truncate",
            "--L",
            "6",
            "--r-max",
            "3",
            "--slope-bound",
            "-100",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path(), "qa-truncate");
    assert_eq!(r["status"], "violation");
    assert!(!r["violations"].as_array().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["sie-max", "--model", "nope"][..],
        &["sie-max", "--model", "zz", "--da", "3"][..],
        &["no-such-command"][..],
        &["sim-scan", "--p", "1.5"][..],
        &["lattice-info", "--region", "0..99"][..],
    ] {
        let o = entlab(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# comment\nseed = 11\ndelta = 0.25\nomega_points = 101\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = entlab(&["--config", cfg, "filter-build"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "filter-build");
    assert_eq!(r["seed"], 11);
    assert_eq!(r["config"]["delta"], 0.25);
    assert_eq!(r["config"]["omega_points"], 101);

    let o = entlab(
        &["--config", cfg, "filter-build", "--delta", "0.75"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path(), "filter-build")["config"]["delta"], 0.75);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "samples = 3\n").unwrap();
    let o = entlab(
        &["--config", bad.to_str().unwrap(), "filter-build"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_entlab"))
        .args(["jw-check", "--modes", "3", "--L", "2"])
        .env("ENTLAB_OUT_DIR", &target)
        .env("ENTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&target, "jw-check")["status"], "clean");
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_entlab"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "sim-scan", "sie-max", "lr-check", "qa-path", "jw-check", "spectrum",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
