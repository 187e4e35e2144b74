use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sigbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigbench")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("exp.toml");
    fs::write(
        &cfg,
        r#"
version = 1
name = "cli"
classifiers = ["logreg"]
signals = ["degree", "core_number"]
eval_seeds = [1, 2, 3]
hpo_budget = 3
hpo_startup = 2
output = "store"
[synthetic]
n = 300
p_in = 0.1
p_out = 0.005
positive_rate = 0.1
"#,
    )
    .unwrap();
    cfg
}

#[test]
fn synth_writes_dataset_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let text = ok(sigbench(&["synth", "--out", out.to_str().unwrap(), "--n", "400", "--p-in", "0.1"]));
    let check: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(check["louvain_ari"].as_f64().unwrap() > 0.5);
    for f in ["edgelist.csv", "features.csv", "classes.csv", "communities.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let classes = fs::read_to_string(out.join("classes.csv")).unwrap();
    assert_eq!(classes.lines().next(), Some("txId,class"));
    assert_eq!(classes.lines().count(), 401);
}

#[test]
fn evaluate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let text = ok(sigbench(&["evaluate", "--config", cfg.to_str().unwrap()]));
    assert!(text.contains("records written: 9, failed: 0"), "{text}");
    let store = dir.path().join("store");
    assert!(store.join("results.jsonl").exists());

    let again = ok(sigbench(&["evaluate", "--config", cfg.to_str().unwrap()]));
    assert!(again.contains("already present: 9"), "{again}");

    let sig = ok(sigbench(&["significance", "--store", store.to_str().unwrap()]));
    let rows: Vec<&str> = sig.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "rho,classifier,degree,core_number");
    assert!(rows[1].starts_with("0,logreg,"));

    let reports = ok(sigbench(&["report", "--store", store.to_str().unwrap()]));
    assert_eq!(reports.lines().count(), 5);
    let only = ok(sigbench(&["report", "--store", store.to_str().unwrap(), "--kind", "significance-matrix"]));
    assert!(only.trim().ends_with("significance-matrix.csv"));
    assert!(!sigbench(&["report", "--store", store.to_str().unwrap(), "--kind", "nope"]).status.success());
}

#[test]
fn signals_export_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let text = ok(sigbench(&["signals", "--config", cfg.to_str().unwrap()]));
    let files: Vec<&str> = text.lines().collect();
    assert_eq!(files.len(), 2);
    let degree = fs::read_to_string(files[0]).unwrap();
    assert!(degree.starts_with("node_id,"));

    let features = dir.path().join("store/data/features.csv");
    let emb = dir.path().join("emb.csv");
    let ids: Vec<String> = fs::read_to_string(&features)
        .unwrap()
        .lines()
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let mut body = String::from("node_id,dim=2\n");
    for id in &ids {
        body.push_str(&format!("{id},0.5,-1.0\n"));
    }
    fs::write(&emb, &body).unwrap();
    let args = ["validate-embeddings", "--embeddings", emb.to_str().unwrap(), "--features", features.to_str().unwrap()];
    assert!(ok(sigbench(&args)).contains("300 rows x 2 dims"));
    let mut strict = args.to_vec();
    strict.extend(["--dim", "3"]);
    assert!(!sigbench(&strict).status.success());

    fs::write(&emb, body.lines().take(100).collect::<Vec<_>>().join("\n")).unwrap();
    assert!(!sigbench(&args).status.success());
}

#[test]
fn perturb_caches_reduced_graph() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.csv");
    let mut text = String::from("txId1,txId2\n");
    for i in 0..100 {
        text.push_str(&format!("{i},{}\n", i + 1));
    }
    fs::write(&edges, text).unwrap();
    let cache = dir.path().join("graphs");
    let args = ["perturb", "--edges", edges.to_str().unwrap(), "--rho", "0.25", "--cache-dir", cache.to_str().unwrap()];
    let out = ok(sigbench(&args));
    assert!(out.contains("kept 75 of 100 edges"), "{out}");
    assert_eq!(ok(sigbench(&args)), out);
    assert!(!sigbench(&["perturb", "--edges", edges.to_str().unwrap(), "--rho", "1.5"]).status.success());
}

#[test]
fn bad_invocations_fail() {
    assert!(!sigbench(&["evaluate", "--no-such-flag"]).status.success());
    assert!(!sigbench(&["evaluate", "--config", "/nonexistent/config.toml"]).status.success());
    assert!(!sigbench(&["frobnicate"]).status.success());
}
