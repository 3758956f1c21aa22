use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--seed", "5", "--count", "30", "--train-count", "20", "--iterations", "20", "--layers", "32,16", "--trees", "3",
];

fn pog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pog"))
        .args(args)
        .args(SMALL)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pog(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn full_run(root: &Path) {
    let data = root.join("data");
    let sda = root.join("sda");
    let banks = root.join("banks");
    let model = sda.join("model.psda");
    ok(&["generate", "--out", s(&data)]);
    ok(&["train-sda", "--dataset", s(&data), "--out", s(&sda)]);
    ok(&["train-rf", "--dataset", s(&data), "--out", s(&banks)]);
    ok(&[
        "train-rf", "--dataset", s(&data), "--variant", "reduced", "--model", s(&model), "--out", s(&banks),
    ]);
    ok(&[
        "evaluate", "--dataset", s(&data), "--banks", s(&banks), "--model", s(&model), "--out", s(&root.join("eval")),
    ]);
}

#[test]
fn pipeline_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(a.path());
    full_run(b.path());
    for file in [
        "data/manifest.json",
        "data/aog.csv",
        "data/pog_3.csv",
        "data/scenes/0007.json",
        "sda/model.psda",
        "sda/loss_trace.csv",
        "sda/sda.json",
        "banks/bank_raw_2.prfb",
        "banks/bank_reduced_0.prfb",
        "banks/rf_reduced.json",
        "eval/report.json",
        "eval/table1.csv",
        "eval/reconstruction_hist.csv",
        "eval/images/0020_1_reduced.pgm",
    ] {
        let x = fs::read(a.path().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file} differs");
    }
    let table = fs::read_to_string(a.path().join("eval/table1.csv")).unwrap();
    assert!(table.starts_with("variant,t_pred,mean_low,mean_mid,mean_high,mean,fallbacks\n"));
    assert_eq!(table.lines().count(), 1 + 2 * 5);
    let timing = fs::read_to_string(a.path().join("banks/timing.log")).unwrap();
    assert!(timing.contains("train-rf raw") && timing.contains("train-rf reduced"));

    // the stored scenes feed the per-scene commands
    let scene = a.path().join("data/scenes/0021.json");
    let oracle = ok(&["plan", s(&scene), "--oracle"]);
    assert!(oracle.contains("selected:"));
    assert_eq!(oracle.lines().filter(|l| l.ends_with(" *")).count(), 1);
    let banks = ok(&["plan", s(&scene), "--banks", s(&a.path().join("banks")), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&banks).unwrap();
    assert_eq!(v["source"], "raw");
    assert_eq!(v["plan"]["candidates"].as_array().unwrap().len(), 15);
}

#[test]
fn classify_and_templates() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = dir.path().join("tpl");
    ok(&["templates", "--out", s(&tpl)]);
    assert!(tpl.join("manifest.json").exists());
    assert!(tpl.join("00_straight.pgm").exists());

    let data = dir.path().join("data");
    ok(&["generate", "--out", s(&data)]);
    let text = ok(&["classify", s(&data.join("scenes/0000.json")), "--templates", s(&tpl)]);
    assert!(text.starts_with("road class: junction_left\n"), "{text}");
    assert!(text.contains("path right: relevant"));
    let json = ok(&["classify", s(&data.join("scenes/0000.json")), "--templates", s(&tpl), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["neighbours"].as_array().unwrap().len(), 9);
    assert_eq!(v["relevance"].as_array().unwrap().len(), 3);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let echoed = ok(&["config"]);
    let path = dir.path().join("cfg.json");
    fs::write(&path, &echoed).unwrap();
    let again = ok(&["config", "--config", s(&path)]);
    assert_eq!(echoed, again);
    let v: serde_json::Value = serde_json::from_str(&echoed).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["dataset"]["count"], 30);
    assert_eq!(v["sda"]["layers"], serde_json::json!([32, 16]));
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(pog(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pog(&["plan", "x.json"]).status.code(), Some(1));
    assert_eq!(pog(&["generate"]).status.code(), Some(1));
    assert_eq!(pog(&["--help"]).status.code(), Some(0));

    // data
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(pog(&["train-sda", "--dataset", s(&missing), "--out", s(dir.path())]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"dataset\": {}}").unwrap();
    let out = pog(&["config", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let zero_k = dir.path().join("k.json");
    fs::write(&zero_k, r#"{"seed": 5, "situation": {"k": 0}}"#).unwrap();
    assert_eq!(pog(&["config", "--config", s(&zero_k)]).status.code(), Some(2));

    // numeric: a huge learning rate diverges
    let data = dir.path().join("data");
    ok(&["generate", "--out", s(&data)]);
    let hot = dir.path().join("hot.json");
    fs::write(&hot, r#"{"seed": 5, "sda": {"train": {"learning_rate": 1e30}}}"#).unwrap();
    let out = pog(&["train-sda", "--config", s(&hot), "--dataset", s(&data), "--out", s(&dir.path().join("sda"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
