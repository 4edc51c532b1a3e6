use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ipop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run",
        "--algo",
        "seq-ipop",
        "--functions",
        "sphere",
        "--dim",
        "3",
        "--cost-ms",
        "0",
        "--runs",
        "2",
        "--lambda-start",
        "6",
        "--kmax",
        "2",
        "--virtual-time",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    ipop(&args)
}

fn best_f_column(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect()
}

#[test]
fn list_functions_names_every_group() {
    let out = ipop(&["list-functions"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in [
        "sphere",
        "step_ellipsoid",
        "discus",
        "schaffers",
        "two_basins",
    ] {
        assert!(text.contains(id), "{id} missing");
    }
}

#[test]
fn run_writes_logs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let runs = dir.path().join("runs/seq-ipop/sphere-d3-c0");
    let files: Vec<_> = fs::read_dir(&runs).unwrap().collect();
    assert_eq!(files.len(), 2);
    let manifest = fs::read_to_string(dir.path().join("manifest.kv")).unwrap();
    assert!(manifest.contains("cell.seq-ipop.sphere-d3-c0.run01"));
    assert!(manifest.contains("status=done"));
}

#[test]
fn same_plan_same_best_f() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &[]).status.success());
    assert!(small_run(b.path(), &[]).status.success());
    let rel = "runs/seq-ipop/sphere-d3-c0/run00.csv";
    assert_eq!(
        best_f_column(&a.path().join(rel)),
        best_f_column(&b.path().join(rel))
    );
}

#[test]
fn too_few_workers_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = ipop(&[
        "run",
        "--algo",
        "k-distributed",
        "--lambda-start",
        "12",
        "--workers",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("workers"));
    assert!(!dir.path().join("manifest.kv").exists());
}

#[test]
fn analyze_writes_tables_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_run(dir.path(), &[]).status.success());
    let d = dir.path().to_str().unwrap();
    let first = ipop(&["analyze", d]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let analysis = dir.path().join("analysis");
    let mut names: Vec<String> = fs::read_dir(&analysis)
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            e.file_type()
                .unwrap()
                .is_file()
                .then(|| e.file_name().into_string().unwrap())
        })
        .collect();
    names.sort();
    assert_eq!(names, ["best_k.csv", "ecdf.csv", "ert.csv", "speedup.csv"]);
    let snapshot: Vec<String> = names
        .iter()
        .map(|n| fs::read_to_string(analysis.join(n)).unwrap())
        .collect();
    assert!(snapshot[2].starts_with("algorithm,function,epsilon,ert_ms,successes,runs\n"));
    assert!(ipop(&["analyze", d]).status.success());
    for (n, before) in names.iter().zip(&snapshot) {
        assert_eq!(&fs::read_to_string(analysis.join(n)).unwrap(), before);
    }
}

#[test]
fn analyze_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ipop(&["analyze", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.kv"));
}

#[test]
fn analyze_names_a_corrupt_log() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_run(dir.path(), &[]).status.success());
    let bad = dir.path().join("runs/seq-ipop/sphere-d3-c0/run01.csv");
    fs::write(&bad, "garbage\n").unwrap();
    let out = ipop(&["analyze", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run01.csv"));
}

#[test]
fn manifest_replay_reproduces_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &[]).status.success());
    let manifest = a.path().join("manifest.kv");
    let out = ipop(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for run in ["run00.csv", "run01.csv"] {
        let rel = Path::new("runs/seq-ipop/sphere-d3-c0").join(run);
        assert_eq!(
            fs::read(a.path().join(&rel)).unwrap(),
            fs::read(b.path().join(&rel)).unwrap()
        );
    }
}
