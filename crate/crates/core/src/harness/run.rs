//! The evaluation protocol: per (classifier, signal configuration, rho) one
//! hyperparameter search on the `hpo_seed` split, frozen for every evaluation
//! seed; baseline and augmented models share each seed's split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, SignalConfig};
use super::registry::SignalCache;
use super::store::{file_digest, CellKey, ResultStore, RunRecord, Status, Timing, SMALL_DISCORDANCE};
use super::synth::{self, DatasetFiles};
use crate::assembly::{concat_signals, load_node_table, prepare, stratified_split, write_split, FeatureTable, LabelVector, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::{cached_perturbation, load_edge_list_bound, Graph, PerturbationSpec};
use crate::models::{cross_entropy, hpo_search, search_space, train, Family, ModelSpec, SearchResult, TpeConfig};
use crate::stats::{mcnemar, metrics, MetricBundle};

/// Graph, features and labels sharing one node order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub table: FeatureTable,
    pub labels: LabelVector,
    pub files: DatasetFiles,
    pub digest: String,
}

/// Loads the configured dataset, generating the synthetic one under
/// `out/data` first when requested.
pub fn load_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<Dataset> {
    let (files, range) = match (&cfg.dataset, &cfg.synthetic) {
        (Some(d), _) => (
            DatasetFiles { edges: d.edges.clone(), features: d.features.clone(), classes: d.classes.clone() },
            d.base_range[0]..d.base_range[1],
        ),
        (None, Some(spec)) => {
            let data = synth::generate(spec)?;
            let files = data.write(&out.join("data"))?;
            (files, 1..1 + spec.n_features)
        }
        (None, None) => return Err(Error::Config("no dataset configured".into())),
    };
    let (ids, table, labels) = load_node_table(&files.features, &files.classes, range)?;
    let graph = load_edge_list_bound(&files.edges, &ids)?;
    let digest = file_digest(&[&files.edges, &files.features, &files.classes])?;
    Ok(Dataset { graph, table, labels, files, digest })
}

pub fn spec_digest(spec: &ModelSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

fn rho_tag(rho: f64) -> String {
    format!("{rho:.4}")
}

/// Validation cross-entropy of `spec` trained on `split.train`.
pub fn validation_loss(spec: &ModelSpec, table: &FeatureTable, labels: &LabelVector, split: &SplitSpec, seed: u64) -> Result<f64> {
    let p = prepare(table, labels, split, &spec.prep_config(seed)?);
    let m = train(spec, &p.x_train, &p.y_train, seed)?;
    Ok(cross_entropy(&m.predict_proba(&p.x_val)?, &p.y_val))
}

/// Test-set predictions and metrics of `spec` at `seed`.
pub fn evaluate(
    spec: &ModelSpec,
    table: &FeatureTable,
    labels: &LabelVector,
    split: &SplitSpec,
    seed: u64,
) -> Result<(MetricBundle, Vec<u8>, Vec<u8>)> {
    let p = prepare(table, labels, split, &spec.prep_config(seed)?);
    let m = train(spec, &p.x_train, &p.y_train, seed)?;
    let pred = m.predict(&p.x_test)?;
    let metrics = metrics(&pred, &p.y_test, 1)?;
    Ok((metrics, pred, p.y_test))
}

/// Runs (or reloads from `cache`) the search for one cell family.
pub fn tune(
    family: Family,
    table: &FeatureTable,
    labels: &LabelVector,
    split: &SplitSpec,
    cfg: &ExperimentConfig,
    cache: Option<&Path>,
) -> Result<SearchResult> {
    if let Some(path) = cache.filter(|p| p.exists()) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()));
    }
    let tpe = TpeConfig {
        budget: cfg.hpo_budget,
        startup: cfg.hpo_startup.min(cfg.hpo_budget),
        seed: cfg.hpo_seed,
        ..TpeConfig::default()
    };
    let result = hpo_search(&search_space(family), &tpe, |spec| validation_loss(spec, table, labels, split, cfg.hpo_seed))?;
    if !result.best_loss.is_finite() {
        let reason = result.trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
        return Err(Error::invalid(format!("every {family} trial failed, e.g. {reason}")));
    }
    if let Some(path) = cache {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string_pretty(&result)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(result)
}

type SeedOutcome = std::result::Result<(MetricBundle, Vec<u8>, Vec<u8>), String>;

/// Frozen spec plus per-seed outcomes of one (classifier, configuration).
struct CellRuns {
    spec: std::result::Result<ModelSpec, String>,
    seeds: BTreeMap<u64, SeedOutcome>,
    seconds: f64,
}

fn run_cell(
    family: Family,
    table: std::result::Result<&FeatureTable, String>,
    labels: &LabelVector,
    splits: &BTreeMap<u64, SplitSpec>,
    cfg: &ExperimentConfig,
    cache: PathBuf,
) -> CellRuns {
    let start = Instant::now();
    let table = match table {
        Ok(t) => t,
        Err(e) => return CellRuns { spec: Err(e), seeds: BTreeMap::new(), seconds: 0.0 },
    };
    let spec = tune(family, table, labels, &splits[&cfg.hpo_seed], cfg, Some(&cache)).map(|r| r.best).map_err(|e| e.to_string());
    let seeds = match &spec {
        Ok(spec) => cfg
            .eval_seeds
            .par_iter()
            .map(|&s| (s, evaluate(spec, table, labels, &splits[&s], s).map_err(|e| e.to_string())))
            .collect(),
        Err(_) => BTreeMap::new(),
    };
    CellRuns { spec, seeds, seconds: start.elapsed().as_secs_f64() }
}

fn records_for(
    family: Family,
    config: &SignalConfig,
    rho: f64,
    runs: &CellRuns,
    baseline: Option<&CellRuns>,
    splits: &BTreeMap<u64, SplitSpec>,
    cfg: &ExperimentConfig,
) -> Vec<RunRecord> {
    cfg.eval_seeds
        .iter()
        .map(|&seed| {
            let split_digest = splits[&seed].digest();
            let spec = match &runs.spec {
                Ok(s) => s,
                Err(e) => return RunRecord::failed(family, config, seed, rho, split_digest, e.clone()),
            };
            let (m, pred, truth) = match &runs.seeds[&seed] {
                Ok(v) => v,
                Err(e) => return RunRecord::failed(family, config, seed, rho, split_digest, e.clone()),
            };
            let paired = baseline
                .and_then(|b| b.seeds.get(&seed))
                .and_then(|o| o.as_ref().ok())
                .and_then(|(_, base_pred, _)| mcnemar(base_pred, pred, truth).ok());
            RunRecord {
                classifier: family,
                config: config.name.clone(),
                signals: config.signals.clone(),
                category: config.category,
                seed,
                rho,
                split_digest,
                spec_digest: Some(spec_digest(spec)),
                status: Status::Ok,
                error: None,
                metrics: Some(*m),
                mcnemar: paired,
                small_discordance: paired.map(|r| r.b + r.c < SMALL_DISCORDANCE),
                reproducible: super::reproducible(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub written: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// Per-seed stratified splits for the search seed and every evaluation seed,
/// also written to `splits/seed<k>.txt` for external encoders.
pub fn make_splits(cfg: &ExperimentConfig, data: &Dataset, dir: Option<&Path>) -> Result<BTreeMap<u64, SplitSpec>> {
    let seeds: BTreeSet<u64> = std::iter::once(cfg.hpo_seed).chain(cfg.eval_seeds.iter().copied()).collect();
    let mut out = BTreeMap::new();
    for s in seeds {
        let split = stratified_split(&data.labels, s)?;
        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_split(&split, data.graph.ids(), &dir.join(format!("seed{s}.txt")))?;
        }
        out.insert(s, split);
    }
    Ok(out)
}

/// Graph variant for `rho`; rho = 0 is the original graph.
pub fn graph_variant(g: &Graph, rho: f64, cfg: &ExperimentConfig, cache_dir: &Path) -> Result<Graph> {
    if rho == 0.0 {
        return Ok(g.clone());
    }
    cached_perturbation(g, PerturbationSpec::new(rho, cfg.perturb_seed)?, "graph", cache_dir)
}

type Tables = BTreeMap<String, std::result::Result<FeatureTable, String>>;

/// Augmented feature tables of `configs` on the rho variant of the graph.
/// Signals are computed once each and shared between configurations.
pub fn build_tables(cfg: &ExperimentConfig, data: &Dataset, rho: f64, configs: &[&SignalConfig], graph_dir: &Path) -> Tables {
    let g = match graph_variant(&data.graph, rho, cfg, graph_dir) {
        Ok(g) => g,
        Err(e) => return configs.iter().map(|k| (k.name.clone(), Err(e.to_string()))).collect(),
    };
    let cache = SignalCache::new(&g, cfg.signal_seed, cfg.embeddings.clone());
    cache.compute_all(&configs.iter().flat_map(|k| k.signals.iter().copied()).collect());
    configs
        .iter()
        .map(|k| {
            let built = k
                .signals
                .iter()
                .map(|&s| cache.get(s))
                .collect::<Result<Vec<_>>>()
                .and_then(|sigs| {
                    let inputs: Vec<_> = sigs.iter().map(|s| s.as_input()).collect();
                    concat_signals(&data.table, &inputs)
                })
                .map_err(|e| e.to_string());
            (k.name.clone(), built)
        })
        .collect()
}

fn baseline_cache(dir: &Path, clf: Family) -> PathBuf {
    dir.join(format!("{clf}__baseline.json"))
}

fn cell_cache(dir: &Path, clf: Family, config: &str, rho: f64) -> PathBuf {
    dir.join(format!("{clf}__{config}__rho{}.json", rho_tag(rho)))
}

/// Only the search stage: fills the spec cache of every cell and returns
/// (cell, best validation loss) pairs. Failed searches are reported as errors.
pub fn run_hpo(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(String, f64)>> {
    super::with_pool(|| {
        cfg.validate()?;
        let data = load_dataset(cfg, out)?;
        let store = ResultStore::open(out, cfg, &data.digest)?;
        let splits = make_splits(cfg, &data, Some(&store.split_dir()))?;
        let split = &splits[&cfg.hpo_seed];
        let dir = store.hpo_dir();
        let mut done = Vec::new();
        for &clf in &cfg.classifiers {
            let r = tune(clf, &data.table, &data.labels, split, cfg, Some(&baseline_cache(&dir, clf)))?;
            done.push((format!("{clf}/baseline"), r.best_loss));
        }
        let configs = cfg.signal_configs()?;
        let refs: Vec<&SignalConfig> = configs.iter().collect();
        for &rho in &cfg.rho {
            let tables = build_tables(cfg, &data, rho, &refs, &store.graph_dir());
            let cells: Vec<(Family, &SignalConfig)> =
                cfg.classifiers.iter().flat_map(|&c| configs.iter().map(move |k| (c, k))).collect();
            let results: Vec<Result<(String, f64)>> = cells
                .par_iter()
                .map(|&(clf, k)| {
                    let table = tables[&k.name].as_ref().map_err(|e| Error::invalid(e.clone()))?;
                    let r = tune(clf, table, &data.labels, split, cfg, Some(&cell_cache(&dir, clf, &k.name, rho)))?;
                    Ok((format!("{clf}/{}/rho={rho}", k.name), r.best_loss))
                })
                .collect();
            for r in results {
                done.push(r?);
            }
        }
        Ok(done)
    })
}

/// Computes every configured signal on the rho variant and writes one file per
/// signal under `out/signals/rho<rho>/`.
pub fn export_signals(cfg: &ExperimentConfig, out: &Path, rho: f64) -> Result<Vec<PathBuf>> {
    super::with_pool(|| {
        let data = load_dataset(cfg, out)?;
        let g = graph_variant(&data.graph, rho, cfg, &out.join("graphs"))?;
        let kinds = cfg.required_signals()?;
        let cache = SignalCache::new(&g, cfg.signal_seed, cfg.embeddings.clone());
        cache.compute_all(&kinds);
        let dir = out.join("signals").join(format!("rho{}", rho_tag(rho)));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut paths = Vec::new();
        for k in kinds {
            let path = dir.join(format!("{k}.csv"));
            cache.get(k)?.write(g.ids(), &path)?;
            paths.push(path);
        }
        Ok(paths)
    })
}

/// Runs every missing cell of the grid and appends it to the store in `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    super::with_pool(|| run_inner(cfg, out))
}

fn run_inner(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg, out)?;
    let mut store = ResultStore::open(out, cfg, &data.digest)?;
    let present = store.keys();
    let configs = cfg.signal_configs()?;
    let splits = make_splits(cfg, &data, Some(&store.split_dir()))?;
    let mut summary = RunSummary::default();

    let missing = |clf: Family, name: &str, rho: f64| {
        cfg.eval_seeds.iter().any(|&s| !present.contains(&CellKey::new(clf, name, s, rho)))
    };
    let any_missing = cfg.rho.iter().any(|&rho| {
        cfg.classifiers
            .iter()
            .any(|&c| missing(c, SignalConfig::BASELINE, rho) || configs.iter().any(|k| missing(c, &k.name, rho)))
    });
    if !any_missing {
        summary.skipped = present.len();
        return Ok(summary);
    }

    // Baseline runs do not depend on the graph, so one search serves every rho.
    let hpo_dir = store.hpo_dir();
    let baseline: BTreeMap<Family, CellRuns> = cfg
        .classifiers
        .par_iter()
        .map(|&clf| {
            (clf, run_cell(clf, Ok(&data.table), &data.labels, &splits, cfg, baseline_cache(&hpo_dir, clf)))
        })
        .collect();
    let base_cfg = SignalConfig::baseline();

    for &rho in &cfg.rho {
        let todo: Vec<(Family, &SignalConfig)> = cfg
            .classifiers
            .iter()
            .flat_map(|&c| configs.iter().map(move |k| (c, k)))
            .filter(|(c, k)| missing(*c, &k.name, rho))
            .collect();
        let mut timings = Vec::new();
        let mut augmented: BTreeMap<(Family, String), CellRuns> = BTreeMap::new();
        if !todo.is_empty() {
            let names: BTreeSet<&str> = todo.iter().map(|(_, k)| k.name.as_str()).collect();
            let wanted: Vec<&SignalConfig> = configs.iter().filter(|k| names.contains(k.name.as_str())).collect();
            let tables = build_tables(cfg, &data, rho, &wanted, &store.graph_dir());
            augmented = todo
                .par_iter()
                .map(|&(clf, k)| {
                    let cache = cell_cache(&hpo_dir, clf, &k.name, rho);
                    let table = tables[&k.name].as_ref().map_err(|e| e.clone());
                    ((clf, k.name.clone()), run_cell(clf, table, &data.labels, &splits, cfg, cache))
                })
                .collect();
        }

        let mut batch = Vec::new();
        for &clf in &cfg.classifiers {
            let base = &baseline[&clf];
            if missing(clf, SignalConfig::BASELINE, rho) {
                batch.extend(records_for(clf, &base_cfg, rho, base, None, &splits, cfg));
                timings.push(Timing { cell: format!("{clf}/baseline/rho={rho}"), seconds: base.seconds });
            }
            for k in &configs {
                if let Some(runs) = augmented.get(&(clf, k.name.clone())) {
                    batch.extend(records_for(clf, k, rho, runs, Some(base), &splits, cfg));
                    timings.push(Timing { cell: format!("{clf}/{}/rho={rho}", k.name), seconds: runs.seconds });
                }
            }
        }
        let batch: Vec<RunRecord> = batch.into_iter().filter(|r| !present.contains(&r.key())).collect();
        summary.written += batch.len();
        summary.failed += batch.iter().filter(|r| r.status == Status::Failed).count();
        for r in batch.iter().filter(|r| r.status == Status::Failed) {
            log::warn!("cell {} failed: {}", r.key(), r.error.as_deref().unwrap_or(""));
        }
        store.append(batch)?;
        store.log_timings(&timings)?;
    }
    summary.skipped = present.len();
    Ok(summary)
}

/// `run_experiment` over a rho list that must include 0.
pub fn run_robustness(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    if !cfg.rho.contains(&0.0) {
        return Err(Error::Config("robustness sweeps need rho = 0 in the level list".into()));
    }
    run_experiment(cfg, out)
}
