use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use touchsig_core::ingest::{encode_session, load_all, replay, Hello};
use touchsig_core::synth::{gen_dataset, ClassSet, GenSpec};

fn touchsig(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_touchsig"))
        .args(args)
        .current_dir(dir)
        .env_remove("TOUCHSIG_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = touchsig(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["--help"]);
    for cmd in ["serve", "synth", "extract", "train", "predict", "eval", "report"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert!(ok(dir.path(), &["eval", "--help"]).contains("--folds"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = touchsig(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn eval_before_train_reports_missing_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--classes", "actions", "--per-class", "3", "--out", "d.ndjson"]);
    ok(dir.path(), &["extract", "--phase", "1", "--in", "d.ndjson", "--out", "m.ndjson"]);
    let out = touchsig(dir.path(), &["eval", "--model", "knn.json", "--in", "m.ndjson", "--report", "r.ndjson"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model not found"));
}

#[test]
fn touch_action_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--classes", "actions", "--per-class", "10", "--separation", "16", "--seed", "2", "--out", "d.ndjson"]);
    ok(d, &["extract", "--phase", "1", "--in", "d.ndjson", "--out", "m.ndjson"]);
    ok(d, &["train", "--model", "knn", "--in", "m.ndjson", "--out", "knn.json"]);

    let preds = ok(d, &["predict", "--model", "knn.json", "--in", "m.ndjson"]);
    assert_eq!(preds.lines().count(), 80);
    for line in preds.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["actual"], v["predicted"]);
    }

    let text = ok(d, &["eval", "--model", "knn", "--folds", "10", "--seed", "4", "--in", "m.ndjson", "--report", "cv.ndjson"]);
    assert!(text.contains("10-fold"));
    assert!(text.contains("folds=4"));
    assert_eq!(std::fs::read_to_string(d.join("cv.txt")).unwrap(), text);
    let again = ok(d, &["report", "--in", "cv.ndjson"]);
    assert_eq!(again, text);

    ok(d, &["eval", "--model", "knn.json", "--in", "m.ndjson", "--report", "fit.ndjson"]);
    let fit = std::fs::read_to_string(d.join("fit.ndjson")).unwrap();
    assert!(fit.contains("\"overall\":1.0"));

    // a phase-2 matrix cannot feed a phase-1 model
    ok(d, &["extract", "--phase", "2", "--in", "d.ndjson", "--out", "m2.ndjson"]);
    let out = touchsig(d, &["predict", "--model", "knn.json", "--in", "m2.ndjson"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn digit_pipeline_is_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--classes", "digits", "--per-class", "20", "--profile", "nexus5", "--out", "d.ndjson"]);
    ok(d, &["extract", "--phase", "2", "--in", "d.ndjson", "--out", "m.ndjson"]);
    for r in ["a.ndjson", "b.ndjson"] {
        ok(d, &["eval", "--model", "ann", "--hidden", "20", "--seed", "3", "--in", "m.ndjson", "--report", r]);
    }
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a.ndjson"), read("b.ndjson"));
    assert_eq!(read("a.tsv"), read("b.tsv"));
    let text = String::from_utf8(read("a.txt")).unwrap();
    assert!(text.contains("First"));
    assert!(text.contains("init=3"));

    ok(d, &["train", "--model", "ann", "--hidden", "20", "--in", "m.ndjson", "--out", "ann.json"]);
    let preds = ok(d, &["predict", "--model", "ann.json", "--in", "m.ndjson"]);
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    assert_eq!(first["ranked"].as_array().unwrap().len(), 10);
    ok(d, &["report", "--in", "a.ndjson", "--plot", "plot.tsv"]);
    assert_eq!(read("plot.tsv"), read("a.tsv"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("touchsig.toml"),
        "profile = \"nexus5\"\n[paths]\ndataset = \"cfg-data.ndjson\"\n[seeds]\nsynth = 5\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_touchsig"))
        .args(["synth", "--classes", "actions", "--per-class", "2"])
        .current_dir(d)
        .env("TOUCHSIG_CONFIG", "touchsig.toml")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traces = load_all(d.join("cfg-data.ndjson")).unwrap();
    let expected = gen_dataset(
        &GenSpec::new(ClassSet::Actions, 2, 16.0, 5).with_profile(touchsig_core::synth::DeviceProfile::nexus5()),
    )
    .unwrap();
    assert_eq!(traces, expected);

    std::fs::write(d.join("bad.toml"), "[server]\nport = 0\n").unwrap();
    let out = touchsig(d, &["--config", "bad.toml", "synth", "--classes", "actions"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn serve_persists_replayed_session_until_interrupted() {
    let dir = tempfile::tempdir().unwrap();
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut child = Command::new(env!("CARGO_BIN_EXE_touchsig"))
        .args(["serve", "--port", &port.to_string(), "--out", "live.ndjson"])
        .current_dir(dir.path())
        .env_remove("TOUCHSIG_CONFIG")
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let mut first = String::new();
    stdout.read_line(&mut first).unwrap();
    assert!(first.starts_with("listening on"), "{first}");

    let traces = gen_dataset(&GenSpec::new(ClassSet::Actions, 1, 4.0, 8)).unwrap();
    let hello = Hello::from_meta("cli", traces[0].meta());
    replay(("127.0.0.1", port), &encode_session(&hello, &traces)).unwrap();
    let path = dir.path().join("live.ndjson");
    let t0 = Instant::now();
    while load_all(&path).map(|t| t.len()).unwrap_or(0) < traces.len() {
        assert!(t0.elapsed() < Duration::from_secs(10), "traces not persisted");
        std::thread::sleep(Duration::from_millis(20));
    }

    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert!(status.success());
    let mut rest = String::new();
    stdout.read_line(&mut rest).unwrap();
    let stats: serde_json::Value = serde_json::from_str(&rest).unwrap();
    assert_eq!(stats["traces_persisted"], traces.len());
    assert_eq!(load_all(&path).unwrap(), traces);
}
