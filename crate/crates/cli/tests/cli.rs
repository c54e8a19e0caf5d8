use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgcca::dataset::{save_matrix, Matrix};
use dgcca::simulation::{generate, SetupId, SetupSpec};
use dgcca::{load_matrix, Format};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgcca"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes the three views of a small planted setup; returns their paths.
fn write_views(dir: &Path, format: Format, ext: &str) -> Vec<PathBuf> {
    let spec = SetupSpec::new(SetupId::S11, 40.0, 60, 1.0, 50, 7).unwrap();
    let (ds, _) = generate(&spec).unwrap();
    ds.views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let path = dir.join(format!("view{}.{ext}", k + 1));
            save_matrix(v, &path, format).unwrap();
            path
        })
        .collect()
}

fn join(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

fn decompose(views: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "decompose",
        "--views",
        views,
        "--seed",
        "11",
        "--bootstrap",
        "200",
        "--rank-bootstrap",
        "50",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
}

#[test]
fn decompose_writes_parts_that_add_up() {
    let tmp = tempfile::tempdir().unwrap();
    let views = write_views(tmp.path(), Format::Csv, "csv");
    let out = tmp.path().join("out");
    assert_ok(&decompose(&join(&views), &out, &[]));

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["schema_version"], dgcca::manifest::SCHEMA_VERSION);
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["seed_generated"], false);
    assert_eq!(manifest["views"].as_array().unwrap().len(), 3);
    assert!(out.join("selection_report.json").exists());

    let pve = std::fs::read_to_string(out.join("pve_variables.csv")).unwrap();
    assert_eq!(pve.lines().next(), Some("level,view,variable,pve_c,pve_d"));
    assert_eq!(pve.lines().count(), 1 + 3 * 60);

    for k in 0..3 {
        let read = |part: &str| {
            load_matrix(&out.join(format!("level1/{k}_view{}_{part}.csv", k + 1)), Format::Csv).unwrap().values
        };
        let (x, c, d) = (read("X"), read("C"), read("D"));
        assert_eq!((x.nrows(), x.ncols()), (60, 50));
        let scale = x.amax().max(1.0);
        assert!((&c + &d - &x).amax() <= 1e-12 * scale);
    }
}

#[test]
fn same_seed_same_output_regardless_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let views = join(&write_views(tmp.path(), Format::Csv, "csv"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&decompose(&views, &a, &["--threads", "1"]));
    assert_ok(&decompose(&views, &b, &["--threads", "2"]));
    for file in ["manifest.json", "selection_report.json", "pve_variables.csv", "level1/0_view1_C.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn binary_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let views = write_views(tmp.path(), Format::Binary, "bin");
    let out = tmp.path().join("out");
    assert_ok(&decompose(&join(&views), &out, &["--output-format", "binary", "--ranks", "1,1,1"]));
    let x = load_matrix(&out.join("level1/0_view1_X.bin"), Format::Binary).unwrap();
    assert_eq!((x.p(), x.n()), (60, 50));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["levels"][0]["ranks"], serde_json::json!([1, 1, 1]));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = decompose("/nonexistent/a.csv,/nonexistent/b.csv", &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).expect("error JSON on stderr");
    assert!(err["error"].is_string());
    assert!(err["message"].as_str().unwrap().contains("a.csv"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["decompose"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--setup", "1.1", "--reps", "many", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn single_view_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let views = write_views(tmp.path(), Format::Csv, "csv");
    let o = decompose(&views[0].display().to_string(), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_swiss_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    // Two tight groups: within-group variation is small.
    let m = dgcca::nalgebra::DMatrix::from_row_slice(2, 4, &[0.0, 0.1, 5.0, 5.1, 1.0, 1.1, -3.0, -3.1]);
    let path = tmp.path().join("m.tsv");
    save_matrix(&Matrix::new(m).unwrap(), &path, Format::Tsv).unwrap();
    let labels = tmp.path().join("labels.txt");
    std::fs::write(&labels, "a\na\nb\nb\n").unwrap();
    let o = run(&["evaluate", "swiss", "--matrix", path.to_str().unwrap(), "--labels", labels.to_str().unwrap()]);
    assert_ok(&o);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metric"], "swiss");
    let score = v["score"].as_f64().unwrap();
    assert!(score > 0.0 && score < 0.01, "{score}");
}

#[test]
fn simulate_writes_summary_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = run(&[
        "simulate", "--setup", "1.1", "--p1", "60", "--n", "50", "--reps", "3", "--seed", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["schema_version"], dgcca::manifest::SCHEMA_VERSION);
    assert_eq!(s["seed"], 5);
    let rows = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(rows.starts_with("rep,err_x_1,"));
}
