//! End-to-end runs of the binary at toy scale: every subcommand, the exit
//! code contract, determinism of artifacts, and stream fault tolerance.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwb-posture"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Tiny but trainable: 2 subjects x 2 samples per class x 12 frames.
fn simulate_tiny(dir: &Path) -> PathBuf {
    let data = dir.join("tiny.jsonl");
    let out = run(&[
        "simulate",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "3",
        "--subjects",
        "2",
        "--samples-per-class",
        "2",
        "--frames",
        "12",
    ]);
    assert_eq!(code(&out), 0, "simulate failed: {}", stderr(&out));
    assert!(stdout(&out).contains("76 samples / 912 frames"));
    data
}

fn train_tiny(dir: &Path, data: &Path) -> PathBuf {
    let model = dir.join("model.json");
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--model-out",
        model.to_str().unwrap(),
        "--tau",
        "2",
        "--num-leaves",
        "8",
        "--max-rounds",
        "4",
        "--patience",
        "4",
        "--min-samples-leaf",
        "4",
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0, "train failed: {}", stderr(&out));
    assert!(stdout(&out).contains("test weighted F1"));
    assert!(model.is_file());
    assert!(dir.join("model.report.json").is_file());
    model
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"][..], &["train", "--help"][..]] {
        let out = run(args);
        assert_eq!(code(&out), 0, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_one() {
    // Unknown flag, missing required flag, bad subcommand.
    assert_eq!(code(&run(&["simulate", "--bogus"])), 1);
    assert_eq!(code(&run(&["train"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    // Invalid simulator shape is a usage error too.
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--out",
        tmp.path().join("x.jsonl").to_str().unwrap(),
        "--subjects",
        "0",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |name: &str, seed: &str| {
        vec![
            "simulate".to_string(),
            "--out".into(),
            tmp.path().join(name).to_str().unwrap().into(),
            "--seed".into(),
            seed.into(),
            "--subjects".into(),
            "1".into(),
            "--samples-per-class".into(),
            "1".into(),
            "--frames".into(),
            "6".into(),
        ]
    };
    for (name, seed) in [("a.jsonl", "9"), ("b.jsonl", "9"), ("c.jsonl", "10")] {
        let argv = args(name, seed);
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert_eq!(code(&run(&refs)), 0);
    }
    let a = std::fs::read(tmp.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(tmp.path().join("b.jsonl")).unwrap();
    let c = std::fs::read(tmp.path().join("c.jsonl")).unwrap();
    assert_eq!(a, b, "same seed, same bytes");
    assert_ne!(a, c, "different seed, different frames");
}

#[test]
fn train_evaluate_predict_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let model = train_tiny(tmp.path(), &data);

    let reports = tmp.path().join("reports");
    let out = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out-dir",
        reports.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "evaluate failed: {}", stderr(&out));
    assert!(stdout(&out).contains("accuracy"));
    assert!(reports.join("confusion_tau2.csv").is_file());
    assert!(reports.join("metrics_tau2.json").is_file());

    let verdicts = tmp.path().join("verdicts.jsonl");
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        verdicts.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "predict failed: {}", stderr(&out));
    let lines: Vec<String> = std::fs::read_to_string(&verdicts)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(lines.len(), 912, "one verdict per frame");
    let first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert!(first.get("label").is_some());
    assert!(first.get("probability").is_some());
    assert!(first.get("is_ood").is_some());
}

#[test]
fn evaluate_rejects_mismatched_window_size() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let model = train_tiny(tmp.path(), &data);
    let out = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--tau",
        "3",
    ]);
    assert_eq!(code(&out), 3, "layout mismatch is a model error");
    assert!(stderr(&out).contains("layout"), "{}", stderr(&out));
}

#[test]
fn evaluate_without_model_needs_experiment_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let out = run(&["evaluate", "--data", data.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--model"));
}

#[test]
fn missing_data_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--data",
        tmp.path().join("absent.jsonl").to_str().unwrap(),
        "--model-out",
        tmp.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn stream_handles_faults_and_acknowledgment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let model = train_tiny(tmp.path(), &data);

    // A short session: one healthy posture segment.
    let session = tmp.path().join("session.jsonl");
    let out = run(&[
        "simulate",
        "--out",
        session.to_str().unwrap(),
        "--seed",
        "3",
        "--session",
        "upright:3,hunch:2",
    ]);
    assert_eq!(code(&out), 0, "session failed: {}", stderr(&out));
    assert!(stdout(&out).contains("25 frames (2 segments)"));

    // Corrupt the input: garbage line, duplicate frame, ack marker.
    let text = std::fs::read_to_string(&session).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let dup = lines[4];
    lines.insert(5, dup);
    lines.insert(3, "{\"not\": \"a frame\"}");
    lines.insert(9, "ACK");
    let patched = lines.join("\n");
    std::fs::write(&session, patched).unwrap();

    let timeline = tmp.path().join("timeline.jsonl");
    let out = run(&[
        "stream",
        "--model",
        model.to_str().unwrap(),
        "--input",
        session.to_str().unwrap(),
        "--timeline",
        timeline.to_str().unwrap(),
        "--alert-after-s",
        "1.0",
        "--ack-marker",
        "ACK",
    ]);
    assert_eq!(code(&out), 0, "stream must survive bad lines: {}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("skipped"), "{err}");
    assert!(stdout(&out).contains("alert"), "ack marker is reported");

    let lines: Vec<String> = std::fs::read_to_string(&timeline)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(lines.len(), 25, "all well-formed frames make the timeline");
    let rec: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    for key in ["timestamp_s", "predicted", "is_ood", "alert_active"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn stream_rejects_wrong_schema_header() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let model = train_tiny(tmp.path(), &data);
    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"schema_version\":99,\"n_taps\":128}\n").unwrap();
    let out = run(&[
        "stream",
        "--model",
        model.to_str().unwrap(),
        "--input",
        bad.to_str().unwrap(),
        "--timeline",
        tmp.path().join("t.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn export_schema_matches_window_size() {
    let out = run(&["export-schema", "--tau", "3"]);
    assert_eq!(code(&out), 0);
    let body: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(body["tau"], 3);
    let base = body["base_feature_count"].as_u64().unwrap();
    assert_eq!(
        body["windowed_feature_count"].as_u64().unwrap(),
        base * 5,
        "tau 3: base block, two lags, two rolling means"
    );
    assert_eq!(
        body["features"].as_array().unwrap().len() as u64,
        base * 5
    );
}

#[test]
fn compare_and_sweep_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_tiny(tmp.path());
    let reports = tmp.path().join("exp");

    let out = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--compare-tau",
        "1,2",
        "--out-dir",
        reports.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0, "compare failed: {}", stderr(&out));
    assert!(stdout(&out).contains("delta"));
    assert!(reports.join("confusion_seed5_tau1.csv").is_file());
    assert!(reports.join("confusion_seed5_tau2.csv").is_file());

    let out = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--sweep",
        "1,2",
        "--out-dir",
        reports.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0, "sweep failed: {}", stderr(&out));
    assert!(reports.join("sweep_seed5.csv").is_file());
}
