use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlmarket"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture() -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/case30_api.m");
    p.to_str().unwrap().to_string()
}

#[test]
fn clear_prints_welfare_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let o = run(&[
        "clear",
        "--case",
        "builtin:1",
        "--formulation",
        "esr",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("esr,3883.72"), "{text}");
    for f in [
        "prices.csv",
        "allocations.csv",
        "esr_ops.csv",
        "summary.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn clear_ndjson_lines_parse() {
    let o = run(&[
        "clear",
        "--case",
        "builtin:2",
        "-f",
        "vl",
        "--format",
        "ndjson",
    ]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["type"], "summary");
    assert!((lines[0]["welfare"].as_f64().unwrap() - 3822.0).abs() < 1e-6);
    assert_eq!(lines[1]["prices"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_flags_relaxed_simultaneous_operation() {
    let o = run(&["verify", "--case", "builtin:3", "-f", "esr"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("not physically realizable"));
}

#[test]
fn verify_passes_and_notes_non_necessity() {
    let o = run(&["verify", "--case", "builtin:4", "-f", "esr"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("sufficient, not necessary"), "{text}");
    for f in ["robust", "vl"] {
        assert_eq!(
            run(&["verify", "--case", "builtin:3", "-f", f])
                .status
                .code(),
            Some(0),
            "{f}"
        );
    }
}

#[test]
fn compare_reports_ordering() {
    let o = run(&["compare", "--case", "builtin:3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("ordering base <= robust <= esr: holds"));
    assert!(text.contains("robust = vl: yes"));
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(
        run(&["clear", "--case", "builtin:9"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["clear", "--case", "missing.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["clear", "--case", "x.json"]).status.code(), Some(2));
    let o = run(&["clear", "--case", "builtin:1", "-f", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_lp_writes_mps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mps");
    let o = run(&[
        "export-lp",
        "--case",
        "builtin:1",
        "-f",
        "robust",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("NAME"));
    assert!(text.trim_end().ends_with("ENDATA"));
}

#[test]
fn small_sweep_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = run(&[
        "sweep",
        "--case",
        &fixture(),
        "--K",
        "0,5",
        "--mode",
        "all",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "volatility_by_K.csv",
        "remuneration_by_K.csv",
        "sweep_summary.csv",
        "sweep_meta.toml",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn matpower_clear_runs() {
    let o = run(&[
        "clear",
        "--case",
        &fixture(),
        "--periods",
        "2",
        "--K",
        "1",
        "-f",
        "vl",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.contains(',')).count(),
        2 + 1 + 30
    );
}
