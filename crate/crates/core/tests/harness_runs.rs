use std::fs;
use std::path::Path;

use proptest::prelude::*;
use sigbench::harness::report::{render, summarize};
use sigbench::harness::synth::adjusted_rand_index;
use sigbench::harness::{
    generate, run_experiment, run_robustness, self_check, write_report, ExperimentConfig, ReportKind, ResultStore,
    RunRecord, SyntheticSpec,
};
use sigbench::Error;

const SMALL: &str = r#"
version = 1
name = "small"
classifiers = ["logreg", "gnb"]
signals = ["degree", "triangles"]
eval_seeds = [1, 2, 3]
hpo_budget = 4
hpo_startup = 2
[synthetic]
n = 300
p_in = 0.1
p_out = 0.005
positive_rate = 0.1
"#;

fn small(rho: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!("rho = [{rho}]\n{SMALL}")).unwrap()
}

fn records_at(dir: &Path, rho: f64) -> Vec<RunRecord> {
    let store = ResultStore::load(dir).unwrap();
    store.records().iter().filter(|r| r.rho == rho).cloned().collect()
}

#[test]
fn completeness_formula() {
    let text = SMALL.replace("eval_seeds = [1, 2, 3]", "").replace("[\"degree\", \"triangles\"]", "[\"degree\", \"triangles\", \"pagerank\"]");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.expected_records().unwrap(), 2 * (3 + 1) * 10);
    let cfg = small("0.0, 0.25, 0.5");
    assert_eq!(cfg.expected_records().unwrap(), 2 * (2 + 1) * 3 * 3);
}

#[test]
fn config_digest_survives_round_trip() {
    let cfg = small("0.0");
    let back: ExperimentConfig = serde_json::from_str(&cfg.canonical_json()).unwrap();
    assert_eq!(back.digest(), cfg.digest());
    assert_ne!(small("0.0, 0.5").digest(), cfg.digest());
}

#[test]
fn robustness_run_is_consistent_with_plain_run() {
    let plain = tempfile::tempdir().unwrap();
    let robust = tempfile::tempdir().unwrap();
    let s = run_experiment(&small("0.0"), plain.path()).unwrap();
    assert_eq!((s.written, s.failed), (18, 0));
    run_robustness(&small("0.0, 0.25"), robust.path()).unwrap();

    let a = records_at(plain.path(), 0.0);
    let b = records_at(robust.path(), 0.0);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let perturbed = records_at(robust.path(), 0.25);
    let base = |v: &[RunRecord]| -> Vec<String> {
        v.iter()
            .filter(|r| r.is_baseline())
            .map(|r| format!("{}/{}/{}/{:?}/{:?}", r.classifier, r.seed, r.split_digest, r.spec_digest, r.metrics))
            .collect()
    };
    assert_eq!(base(&b), base(&perturbed));
    assert!(perturbed.iter().all(|r| r.metrics.is_some()));

    let store = ResultStore::load(robust.path()).unwrap();
    for kind in ReportKind::ALL {
        let first = render(&store, kind).unwrap();
        assert_eq!(first, render(&store, kind).unwrap(), "{}", kind.name());
        let path = write_report(&store, kind, &store.report_dir()).unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), first);
        assert!(first.lines().any(|l| !l.starts_with('#')));
    }
    let trend = render(&store, ReportKind::RobustnessTrend).unwrap();
    assert!(trend.lines().any(|l| l.starts_with("category,cohesion,0.25,")));

    // significance counts in the summary agree with the stored tests
    for c in summarize(&store).unwrap().iter().filter(|c| c.config != "baseline") {
        let better = store
            .records()
            .iter()
            .filter(|r| r.rho == c.rho && r.classifier == c.classifier && r.config == c.config)
            .filter(|r| r.mcnemar.is_some_and(|m| m.p <= 0.05 && m.c > m.b))
            .count();
        assert_eq!(better, c.n_better);
    }
}

#[test]
fn incomplete_store_is_reported_and_resumed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("0.0");
    run_experiment(&cfg, dir.path()).unwrap();
    let results = dir.path().join(ResultStore::RESULTS);
    let full = fs::read_to_string(&results).unwrap();
    let kept: Vec<&str> = full.lines().collect();
    fs::write(&results, kept[..kept.len() - 2].join("\n") + "\n").unwrap();

    let store = ResultStore::load(dir.path()).unwrap();
    assert_eq!(store.missing_cells().unwrap().len(), 2);
    match summarize(&store) {
        Err(Error::IncompleteStore(..)) => {}
        other => panic!("expected an incomplete-store error, got {other:?}"),
    }
    assert!(render(&store, ReportKind::MatrixMeanStd).is_err());

    let s = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!((s.written, s.skipped), (2, 16));
    assert_eq!(fs::read_to_string(&results).unwrap(), full);
}

#[test]
fn store_rejects_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small("0.0"), dir.path()).unwrap();
    let other = ExperimentConfig::from_toml(&format!("rho = [0.0]\n{}", SMALL.replace("hpo_budget = 4", "hpo_budget = 5"))).unwrap();
    assert!(run_experiment(&other, dir.path()).is_err());
}

#[test]
fn planted_partition_is_recoverable() {
    let data = generate(&SyntheticSpec::default()).unwrap();
    let check = self_check(&data, 42).unwrap();
    assert!(check.louvain_ari >= 0.9, "{check:?}");
    let share = check.positives as f64 / 2000.0;
    assert!((share - 0.03).abs() < 0.01, "{share}");
}

/// ARI from explicit pair enumeration.
fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += f64::from(u8::from(sa && sb));
            in_a += f64::from(u8::from(sa));
            in_b += f64::from(u8::from(sb));
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = in_a * in_b / pairs;
    let max = (in_a + in_b) / 2.0;
    if max == expected {
        1.0
    } else {
        (both - expected) / (max - expected)
    }
}

proptest! {
    #[test]
    fn ari_matches_pair_counting((a, b) in (2usize..40).prop_flat_map(|n| {
        (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n))
    })) {
        prop_assert!((adjusted_rand_index(&a, &b) - ari_oracle(&a, &b)).abs() < 1e-9);
    }
}
