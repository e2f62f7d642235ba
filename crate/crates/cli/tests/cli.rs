use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn arat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arat"))
        .args(args)
        .env("RA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = arat(args);
    assert!(
        out.status.success(),
        "arat {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset; returns the manifest path.
fn synth(dir: &Path, per_class: &str, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--out", s(&data), "--per-class", per_class, "--median-len", "90"];
    args.extend_from_slice(extra);
    ok(&args);
    data.join("manifest.csv")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn synth_then_cv_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "6", &[]);
    let out = tmp.path().join("cv");
    ok(&["cv", "--manifest", s(&manifest), "--folds", "3", "--features", "840", "--out", s(&out)]);
    for name in [
        "cv_report.json",
        "item_confusion.csv",
        "item_confusion.txt",
        "domain_confusion.csv",
        "domain_confusion.txt",
        "folds.csv",
        "run_metadata.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let meta = read_json(&out.join("run_metadata.json"));
    assert_eq!(meta["command"], "cv");
    assert_eq!(meta["seed"], 42);
    let report = read_json(&out.join("cv_report.json"));
    assert_eq!(report["num_sequences"], 30);
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
}

#[test]
fn cv_is_deterministic_under_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "5", &[]);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "cv", "--manifest", s(&manifest), "--folds", "3", "--features", "840", "--seed", "7",
            "--noise-std-acc", "0.5", "--out", s(&out),
        ]);
        without_timing(read_json(&out.join("cv_report.json")))
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn missing_manifest_exits_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.csv");
    let out = arat(&["cv", "--manifest", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: Value = serde_json::from_str(stderr.trim()).expect("one JSON line on stderr");
    assert_eq!(err["error"], "data");
    assert_eq!(err["exit_code"], 3);
    assert!(err["message"].as_str().unwrap().contains("absent.csv"), "{stderr}");
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    assert_eq!(arat(&["cv"]).status.code(), Some(2));
    assert_eq!(arat(&["frobnicate"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "2", &[]);
    let out = arat(&["cv", "--manifest", s(&manifest), "--padding", "sideways"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(arat(&["--help"]).status.success());
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_arat"))
        .args(["report", "--confusion", "x.csv"])
        .env("RA_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_dataset_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "3", &["--junk", "20"]);
    let out = tmp.path().join("v");
    ok(&["validate", "--manifest", s(&manifest), "--balance-junk", "--out", s(&out)]);
    let meta = read_json(&out.join("run_metadata.json"));
    assert_eq!(meta["command"], "validate");
}

#[test]
fn grid_ranks_configs_and_records_truncation() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "4", &[]);
    let configs = tmp.path().join("configs.txt");
    fs::write(
        &configs,
        "padding = zero\n\nnoise_std_acc = 1000000\n\npadding = mean\nnoise_std_acc = 0.5\nnoise_std_gyr = 3\n\n\
         padding = mean\nfilter_acc_hz = 10\nfilter_gyr_hz = 10\n",
    )
    .unwrap();
    let out = tmp.path().join("grid");
    ok(&[
        "grid", "--manifest", s(&manifest), "--configs", s(&configs), "--keep-fraction", "0.75", "--folds", "2",
        "--features", "840", "--out", s(&out),
    ]);
    let csv = fs::read_to_string(out.join("grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "{csv}");
    assert!(lines[0].starts_with("rank,"));
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{},", i + 1)), "{line}");
    }
    let meta = read_json(&out.join("run_metadata.json"));
    assert_eq!(meta["loaded_sequences"], 20);
    assert_eq!(meta["dataset"]["sequences"], 15);
    assert_eq!(meta["configs"], 4);
}

#[test]
fn truncate_cv_writes_both_runs_and_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "8", &["--heavy-tail"]);
    let out = tmp.path().join("trunc");
    ok(&[
        "truncate-cv", "--manifest", s(&manifest), "--folds", "2", "--stratified", "--features", "840", "--out",
        s(&out),
    ]);
    assert!(out.join("full/cv_report.json").is_file());
    assert!(out.join("truncated/cv_report.json").is_file());
    assert!(out.join("delta.txt").is_file());
    let delta = read_json(&out.join("delta.json"));
    assert_eq!(delta["full"]["sequences"], 40);
    assert_eq!(delta["truncated"]["sequences"], 30);
    assert!(delta["truncated"]["max_padded_length"].as_u64() <= delta["full"]["max_padded_length"].as_u64());
}

#[test]
fn fit_then_transform_with_model_predicts() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "4", &[]);
    let model = tmp.path().join("model");
    ok(&["fit", "--manifest", s(&manifest), "--features", "840", "--out", s(&model)]);
    assert!(model.join("rocket.json").is_file());
    assert!(model.join("classifier.json").is_file());
    let out = tmp.path().join("pred");
    ok(&["transform", "--manifest", s(&manifest), "--model", s(&model), "--out", s(&out)]);
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 21);
    let features = fs::read_to_string(out.join("features.csv")).unwrap();
    assert_eq!(features.lines().count(), 21);
}

#[test]
fn report_renders_a_perfect_confusion_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "6", &[]);
    let cv = tmp.path().join("cv");
    ok(&["cv", "--manifest", s(&manifest), "--folds", "3", "--features", "840", "--out", s(&cv)]);
    let rendered = tmp.path().join("rendered");
    let out = ok(&["report", "--report", s(&cv.join("cv_report.json")), "--normalize", "--out", s(&rendered)]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("items"));
    let domain = fs::read_to_string(rendered.join("domain_confusion.csv")).unwrap();
    assert_eq!(domain.lines().count(), 5, "{domain}");

    let cm = tmp.path().join("identity.csv");
    fs::write(&cm, "truth\\predicted,A,B\nA,3,0\nB,0,2\n").unwrap();
    let out = ok(&["report", "--confusion", s(&cm), "--normalize"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("100.0").count(), 2, "{text}");
}
