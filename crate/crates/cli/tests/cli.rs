use std::path::Path;
use std::process::{Command, Output};

use linknoise::eval::{load_report, load_summary_csv, without_timing};
use serde_json::Value;

fn linknoise(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linknoise"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = linknoise(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_kind(dir: &Path, args: &[&str]) -> String {
    let out = linknoise(dir, args);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert!(v["error"]["message"].is_string());
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, config: Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path.display().to_string()
}

#[test]
fn verify_props_reports_monotone_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let written = ok(tmp.path(), &["verify-props", "--out", "o"]);
    assert_eq!(written["written"].as_array().unwrap().len(), 4);
    for name in ["props-degree", "props-similarity"] {
        let report = read_json(tmp.path().join(format!("o/{name}.json")));
        assert_eq!(report["verdict"], Value::Bool(true));
        let csv = std::fs::read_to_string(tmp.path().join(format!("o/{name}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("param,value,h_u_true_class"));
    }
    let degree = read_json(tmp.path().join("o/props-degree.json"));
    assert_eq!(degree["claims"].as_array().unwrap().len(), 2);
}

#[test]
fn attack_with_one_target_writes_one_result() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({ "attack": { "surrogate": { "max_epochs": 50 } } }),
    );
    let written = ok(
        tmp.path(),
        &[
            "--config",
            &config,
            "attack",
            "--methods",
            "NGA",
            "--targets",
            "5",
            "--out",
            "a",
        ],
    );
    let files = written["written"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(
        std::fs::read_dir(tmp.path().join("a/attacks"))
            .unwrap()
            .count(),
        1
    );
    let result = read_json(tmp.path().join(files[0].as_str().unwrap()));
    assert_eq!(result["target"], 5);
    assert_eq!(result["method"], "NGA");
    let links = result["links"].as_array().unwrap();
    assert!(!links.is_empty());
    assert_eq!(result["evaluations"].as_u64().unwrap(), links.len() as u64);

    ok(
        tmp.path(),
        &[
            "--config",
            &config,
            "attack",
            "--methods",
            "NGA",
            "--targets",
            "5",
            "--out",
            "b",
        ],
    );
    let again = read_json(tmp.path().join("b/attacks/NGA-ENT-5.json"));
    assert_eq!(without_timing(again), without_timing(result));
}

#[test]
fn evaluate_then_analyze_is_consistent_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "evaluate": {
                "seeds": [0],
                "n_targets": 6,
                "methods": ["NGA", "NMA"],
                "metrics": ["ENT"],
                "victims": ["GCN", "SGC"],
                "surrogate": { "max_epochs": 60 },
                "victim_gcn": { "max_epochs": 60 },
            },
            "analyze": { "containment_targets": 2, "pool_size": 6, "max_len": 2 },
        }),
    );
    ok(
        tmp.path(),
        &["--config", &config, "evaluate", "--out", "run"],
    );
    let report = load_report(tmp.path().join("run/report.json")).unwrap();
    assert_eq!(report.entries.len(), 4);
    assert_eq!(
        load_summary_csv(tmp.path().join("run/summary.csv"))
            .unwrap()
            .len(),
        4
    );

    ok(
        tmp.path(),
        &["--config", &config, "analyze", "--out", "run"],
    );
    let analysis = read_json(tmp.path().join("run/analysis.json"));
    assert_eq!(analysis["consistent"], Value::Bool(true));
    let entries = analysis["entries"].as_array().unwrap();
    assert_eq!(entries.len(), report.entries.len());
    for e in entries {
        let stored = report
            .entries
            .iter()
            .find(|r| {
                serde_json::to_value(r.method).unwrap() == e["method"]
                    && serde_json::to_value(r.victim).unwrap() == e["victim"]
            })
            .unwrap();
        assert_eq!(
            e["properties"],
            serde_json::to_value(&stored.properties).unwrap()
        );
    }
    let tables = analysis["containment"][0]["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 2);
    assert_eq!(tables[0]["levels"].as_array().unwrap().len(), 2);

    ok(
        tmp.path(),
        &["--config", &config, "evaluate", "--out", "rerun"],
    );
    assert_eq!(
        without_timing(read_json(tmp.path().join("rerun/report.json"))),
        without_timing(read_json(tmp.path().join("run/report.json")))
    );
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({ "seed": 3, "train": { "model": "SGC", "hyperparams": { "max_epochs": 20, "patience": 10 } } }),
    );
    ok(tmp.path(), &["--config", &config, "train", "--out", "t"]);
    let file = read_json(tmp.path().join("t/train.json"));
    assert_eq!(
        (file["model"].as_str(), file["seed"].as_u64()),
        (Some("SGC"), Some(3))
    );

    ok(
        tmp.path(),
        &[
            "--config", &config, "--seed", "4", "train", "--model", "gcn", "--out", "t",
        ],
    );
    let flagged = read_json(tmp.path().join("t/train.json"));
    assert_eq!(
        (flagged["model"].as_str(), flagged["seed"].as_u64()),
        (Some("GCN"), Some(4))
    );
    assert_eq!(flagged["hyperparams"]["max_epochs"], 20);
    let test_accuracy = flagged["accuracy"]["test"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&test_accuracy));
    assert!(tmp.path().join("t/model.json").is_file());
}

#[test]
fn synthetic_dataset_round_trips_through_a_directory() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--profile", "cora", "--dir", "cora"]);
    let config = write_config(
        tmp.path(),
        serde_json::json!({ "train": { "hyperparams": { "max_epochs": 30 } } }),
    );
    ok(
        tmp.path(),
        &[
            "--config",
            &config,
            "train",
            "--dataset",
            "cora",
            "--out",
            "dir",
        ],
    );
    ok(
        tmp.path(),
        &[
            "--config",
            &config,
            "train",
            "--dataset",
            "synthetic:cora",
            "--out",
            "gen",
        ],
    );
    let from_dir = read_json(tmp.path().join("dir/train.json"));
    let generated = read_json(tmp.path().join("gen/train.json"));
    assert_eq!(from_dir["node_count"], generated["node_count"]);
    assert_eq!(from_dir["accuracy"], generated["accuracy"]);
}

#[test]
fn failures_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), serde_json::json!({ "train": { "epochs": 5 } }));
    assert_eq!(
        error_kind(tmp.path(), &["--config", &bad, "train"]),
        "config"
    );
    assert_eq!(
        error_kind(tmp.path(), &["--config", "missing.json", "train"]),
        "io"
    );
    assert_eq!(
        error_kind(tmp.path(), &["train", "--dataset", "no-such-dir"]),
        "dataset"
    );
    assert_eq!(
        error_kind(tmp.path(), &["train", "--dataset", "synthetic:atlantis"]),
        "config"
    );
    assert_eq!(error_kind(tmp.path(), &["analyze", "--out", "empty"]), "io");
    assert_eq!(
        error_kind(tmp.path(), &["attack", "--targets", "999999"]),
        "config"
    );
    assert_eq!(
        error_kind(tmp.path(), &["evaluate", "--n-targets", "0"]),
        "config"
    );
    assert_eq!(
        error_kind(tmp.path(), &["--jobs", "0", "verify-props"]),
        "config"
    );
    assert_eq!(error_kind(tmp.path(), &["no-such-command"]), "usage");
}
