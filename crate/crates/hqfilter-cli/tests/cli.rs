//! End-to-end checks of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(
        &path,
        "t_final = 0.2\nensemble = 2\nn_prime = 4\nstride = 20\nworkers = 1\nseed = 11\n",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hqfilter"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn experiment_then_plot_produces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = dir.path().join("run");

    let result = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    for name in [
        "fig4_sigma_x.csv",
        "fig5_sigma_y.csv",
        "fig6_sigma_z.csv",
        "fig7_q.csv",
        "manifest.toml",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    let result = run(&["plot", "--out", out.to_str().unwrap()]);
    assert!(result.status.success());
    assert!(out.join("fig7_q.svg").exists());
}

#[test]
fn simulate_and_filter_write_per_trajectory_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = dir.path().join("run");

    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    assert!(out.join("record_000.csv").exists());
    assert!(out.join("record_001.csv").exists());

    let result = run(&[
        "filter",
        "--method",
        "both",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let sme = fs::read_to_string(out.join("sme_000.csv")).unwrap();
    assert!(sme.starts_with("t,sx_hat,sy_hat,sz_hat,q_hat,trace_err,min_eig"));
    let qekf = fs::read_to_string(out.join("qekf_000.csv")).unwrap();
    assert!(qekf.starts_with("t,sx_hat,sy_hat,sz_hat,q2_hat,p2_hat,P_trace,K_1"));
}

#[test]
fn seed_override_changes_outputs_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "11"), (&out_b, "12")] {
        let result = run(&[
            "experiment",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success());
    }
    let a = fs::read(out_a.join("fig7_q.csv")).unwrap();
    let b = fs::read(out_b.join("fig7_q.csv")).unwrap();
    assert_ne!(a, b);
    let manifest = fs::read_to_string(out_b.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 12"));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "u = -1.0\n").unwrap();
    let result = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert!(!result.status.success());
}
