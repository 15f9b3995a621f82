use std::path::Path;
use std::process::{Command, Output};

fn pairsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("PAIRSIM_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pairsim(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
    "synth": {"records_per_leaf": 30},
    "embedding": {"dim": 6, "epochs": 2},
    "pairs": {"target_per_class": 150},
    "train": {"encoder": "mean", "epochs": 2}
}"#;

/// Runs the whole chain up to a trained model in `dir`.
fn trained(dir: &Path) {
    std::fs::write(dir.join("run.json"), SMALL).unwrap();
    for cmd in ["synth", "preprocess", "build-vocab", "train-embeddings", "gen-pairs", "split", "train"] {
        ok(dir, &["--config", "run.json", "--seed", "5", cmd]);
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let none = pairsim(dir.path(), &[]);
    assert_eq!(none.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&none.stderr).contains("Usage"));

    assert_eq!(pairsim(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(pairsim(dir.path(), &["train", "--epochs", "x"]).status.code(), Some(1));
    assert_eq!(pairsim(dir.path(), &["--help"]).status.code(), Some(0));

    let missing = pairsim(dir.path(), &["preprocess", "--input", "nowhere.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    std::fs::write(dir.path().join("bad.json"), r#"{"seeed": 1}"#).unwrap();
    assert_eq!(pairsim(dir.path(), &["--config", "bad.json", "synth"]).status.code(), Some(1));
    let unknown = pairsim(dir.path(), &["gradcheck", "--encoders", "transformer"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn divergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let out = pairsim(dir.path(), &["--config", "run.json", "train", "--encoder", "lstm", "--lr", "1e300"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_pairs_is_balanced_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth"]);
    ok(d, &["gen-pairs", "--target-per-class", "200", "--seed", "7", "--out", "a.jsonl"]);
    let text = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    let mut counts = [0; 4];
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        counts[v["score"].as_u64().unwrap() as usize] += 1;
    }
    assert_eq!(counts, [200; 4]);

    // the environment seed is used when neither flag nor config sets one
    let out = Command::new(env!("CARGO_BIN_EXE_pairsim"))
        .args(["gen-pairs", "--target-per-class", "200", "--out", "b.jsonl"])
        .current_dir(d)
        .env("PAIRSIM_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(d.join("b.jsonl")).unwrap(), text.as_bytes());
    ok(d, &["gen-pairs", "--target-per-class", "200", "--seed", "8", "--out", "c.jsonl"]);
    assert_ne!(std::fs::read(d.join("c.jsonl")).unwrap(), text.as_bytes());

    let meta = json(&d.join("a.jsonl.meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), r#"{"seed": 3, "pairs": {"target_per_class": 50}}"#).unwrap();
    ok(d, &["--config", "run.json", "synth"]);
    ok(d, &["--config", "run.json", "gen-pairs", "--target-per-class", "20", "--seed", "4"]);
    let lines = std::fs::read_to_string(d.join("pairs.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 80);
    assert_eq!(json(&d.join("pairs.jsonl.meta.json"))["seed"], 4);
    assert_eq!(json(&d.join("records.jsonl.meta.json"))["seed"], 3);
}

#[test]
fn train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let train_report = json(&d.join("reports/train-mean.json"));
    assert_eq!(train_report["seed"], 5);

    let table = ok(d, &["--config", "run.json", "eval"]);
    assert!(table.contains("Weighted F1 Score"), "{table}");
    let metrics = json(&d.join("reports/metrics.json"));
    assert_eq!(metrics["seed"], 5);
    assert_eq!(metrics["encoder"], "mean");
    let digest = metrics["config_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(std::fs::read_to_string(d.join("reports/metrics.txt")).unwrap().contains(digest));

    // the first record's words are known to the model
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(d.join("records.jsonl")).unwrap().lines().next().unwrap())
            .unwrap();
    let (a, b) = (first["title"].as_str().unwrap(), first["desc"].as_str().unwrap());
    let ab = ok(d, &["predict", "--text-a", a, "--text-b", b]);
    let ba = ok(d, &["predict", "--text-a", b, "--text-b", a]);
    assert_eq!(ab, ba);
    assert!(ab.contains("score:"), "{ab}");

    let unknown = pairsim(d, &["predict", "--text-a", "qqq", "--text-b", "zzz"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn gradcheck_reports_a_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gradcheck"]);
    assert!(out.contains("max relative error"), "{out}");
    for kind in ["mean", "cnn", "lstm"] {
        assert!(out.contains(kind), "{out}");
    }
}
