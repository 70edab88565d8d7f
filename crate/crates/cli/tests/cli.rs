//! End-to-end tests of the `cbf-opt` binary: exit codes, output files,
//! CSV schema, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_cbf-opt")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn closing_config(controller: &str, t_end: &str) -> String {
    format!(
        "\
# closing scenario
p0=0
v0=10
v_star=10
gamma=10
u_max=5
c1=3
cA=100
cB=1
dt=1e-3
T_end={t_end}
delta0=40
delta_dot0=1
controller={controller}
"
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env("CBF_OPT_LOG", "quiet")
        .output()
        .unwrap()
}

#[test]
fn simulate_writes_csv_with_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "closing.cfg", &closing_config("optimal", "30"));
    let out = dir.path().join("run.csv");
    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,p,v,u,delta,delta_dot,b,b_dot,cbf_upper_bound,cbf_active,infeasible"
    );
    assert_eq!(lines.count(), 30001, "data rows = T_end/dt + 1");
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("max_b="));
    assert!(stdout.contains("violation_steps=0"));
}

#[test]
fn unfiltered_collision_exits_with_safety_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "crash.cfg", &closing_config("none", "30"));
    let out = dir.path().join("run.csv");
    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
}

#[test]
fn controller_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "crash.cfg", &closing_config("none", "30"));
    let out = dir.path().join("run.csv");
    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--controller",
        "optimal",
    ]);
    assert!(result.status.success(), "{result:?}");
}

#[test]
fn dt_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "closing.cfg", &closing_config("optimal", "30"));
    let out = dir.path().join("run.csv");
    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dt",
        "2e-3",
    ]);
    assert!(result.status.success(), "{result:?}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count() - 1, 15001, "rows = T_end/dt + 1");
}

#[test]
fn config_errors_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let body = closing_config("optimal", "30").replace("u_max=5\n", "");
    let cfg = write_config(dir.path(), "broken.cfg", &body);
    let out = dir.path().join("run.csv");
    let result = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(4));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("u_max"), "stderr: {stderr}");
}

#[test]
fn missing_file_exits_with_code_4() {
    let result = run(&["simulate", "--config", "/nonexistent.cfg", "--out", "/tmp/x.csv"]);
    assert_eq!(result.status.code(), Some(4));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "closing.cfg", &closing_config("optimal", "5"));
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(result.status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "identical config and seed must give identical bytes");
}

#[test]
fn compare_emits_svg_and_paired_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "closing.cfg", &closing_config("optimal", "10"));
    let svg_out = dir.path().join("fig.svg");
    let result = run(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        svg_out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");

    let svg = std::fs::read_to_string(&svg_out).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2, "two bound series");

    let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,b_optimal,cbf_upper_bound_optimal,b_linear,cbf_upper_bound_linear"
    );
    assert_eq!(csv.lines().count(), 10002);

    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("braking_onset_delta="));
    assert!(stdout.contains("optimal_max_b="));
    assert!(stdout.contains("linear_max_b="));
}

#[test]
fn safeset_reports_full_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "closing.cfg", &closing_config("optimal", "1"));
    let out = dir.path().join("grid.csv");
    let result = run(&[
        "safeset",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8(result.stdout).unwrap();
    let agreement_line = stdout
        .lines()
        .find(|l| l.starts_with("agreement="))
        .expect("agreement line");
    let frac: f64 = agreement_line["agreement=".len()..].parse().unwrap();
    assert!(frac >= 0.99, "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 101 * 101 + 1);
}
