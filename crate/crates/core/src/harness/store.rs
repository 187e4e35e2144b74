//! Append-only result store: `results.jsonl` (one record per line), a
//! manifest, the canonical config, and a separate `timings.jsonl` so that
//! wall-clock noise never touches the results file.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, SignalConfig};
use crate::error::{Error, Result};
use crate::models::Family;
use crate::signals::{Category, SignalKind};
use crate::stats::{McNemarResult, MetricBundle};

pub const STORE_FORMAT: u32 = 1;

/// Discordant-pair total below which the chi-square approximation is shaky.
pub const SMALL_DISCORDANCE: usize = 25;

/// Classifier substitutions declared in every manifest and report header.
pub const SUBSTITUTIONS: [&str; 2] = [
    "gbt: native histogram gradient-boosted trees in place of XGBoost",
    "linear_svm: linear hinge SVM with a logistic link in place of RBF SVC",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub classifier: Family,
    pub config: String,
    pub signals: Vec<SignalKind>,
    pub category: Option<Category>,
    pub seed: u64,
    pub rho: f64,
    pub split_digest: String,
    /// Digest of the frozen hyperparameters used for this run.
    pub spec_digest: Option<String>,
    pub status: Status,
    pub error: Option<String>,
    pub metrics: Option<MetricBundle>,
    /// Against the baseline of the same (classifier, seed, rho); absent for
    /// baseline rows.
    pub mcnemar: Option<McNemarResult>,
    pub small_discordance: Option<bool>,
    pub reproducible: bool,
}

/// Identity of one cell of the evaluation grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub classifier: Family,
    pub config: String,
    pub seed: u64,
    pub rho_bits: u64,
}

impl CellKey {
    pub fn new(classifier: Family, config: &str, seed: u64, rho: f64) -> Self {
        CellKey { classifier, config: config.to_string(), seed, rho_bits: rho.to_bits() }
    }

    pub fn rho(&self) -> f64 {
        f64::from_bits(self.rho_bits)
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/seed={}/rho={}", self.classifier, self.config, self.seed, self.rho())
    }
}

impl RunRecord {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.classifier, &self.config, self.seed, self.rho)
    }

    pub fn is_baseline(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn f1(&self) -> Option<f64> {
        self.metrics.map(|m| m.f1)
    }

    pub fn failed(classifier: Family, cfg: &SignalConfig, seed: u64, rho: f64, split_digest: String, reason: String) -> Self {
        RunRecord {
            classifier,
            config: cfg.name.clone(),
            signals: cfg.signals.clone(),
            category: cfg.category,
            seed,
            rho,
            split_digest,
            spec_digest: None,
            status: Status::Failed,
            error: Some(reason),
            metrics: None,
            mcnemar: None,
            small_discordance: None,
            reproducible: super::reproducible(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub name: String,
    pub config_digest: String,
    pub dataset_digest: String,
    pub code_version: String,
    pub substitutions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub cell: String,
    pub seconds: f64,
}

/// SHA-256 over the dataset files in order.
pub fn file_digest(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| Error::io(*p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug)]
pub struct ResultStore {
    dir: PathBuf,
    pub manifest: Manifest,
    pub config: ExperimentConfig,
    records: Vec<RunRecord>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

impl ResultStore {
    pub const RESULTS: &'static str = "results.jsonl";
    pub const MANIFEST: &'static str = "manifest.json";
    pub const CONFIG: &'static str = "config.json";
    pub const TIMINGS: &'static str = "timings.jsonl";

    /// Opens the store in `dir`, creating it if absent. An existing store must
    /// have been written for the same configuration and dataset.
    pub fn open(dir: &Path, config: &ExperimentConfig, dataset_digest: &str) -> Result<Self> {
        let manifest = Manifest {
            format: STORE_FORMAT,
            name: config.name.clone(),
            config_digest: config.digest(),
            dataset_digest: dataset_digest.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            substitutions: SUBSTITUTIONS.iter().map(|s| s.to_string()).collect(),
        };
        let mpath = dir.join(Self::MANIFEST);
        if mpath.exists() {
            let existing: Manifest = read_json(&mpath)?;
            if existing.config_digest != manifest.config_digest || existing.dataset_digest != manifest.dataset_digest {
                return Err(Error::Config(format!(
                    "store {} was written for another configuration or dataset; use a fresh output directory",
                    dir.display()
                )));
            }
            return Self::load(dir);
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(Self::CONFIG), config)?;
        write_json(&mpath, &manifest)?;
        fs::write(dir.join(Self::RESULTS), "").map_err(|e| Error::io(dir.join(Self::RESULTS), e))?;
        Ok(ResultStore { dir: dir.to_path_buf(), manifest, config: config.clone(), records: Vec::new() })
    }

    /// Reads an existing store; the manifest digest must match the stored config.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&dir.join(Self::MANIFEST))?;
        let config: ExperimentConfig = read_json(&dir.join(Self::CONFIG))?;
        if config.digest() != manifest.config_digest {
            return Err(Error::Config(format!("{}: manifest digest does not match config.json", dir.display())));
        }
        let path = dir.join(Self::RESULTS);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| Error::parse(&path, i + 1, e.to_string()))?);
        }
        Ok(ResultStore { dir: dir.to_path_buf(), manifest, config, records })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn keys(&self) -> BTreeSet<CellKey> {
        self.records.iter().map(RunRecord::key).collect()
    }

    /// Appends records in the given order. Cells already present are refused.
    pub fn append(&mut self, batch: Vec<RunRecord>) -> Result<()> {
        let mut present = self.keys();
        for r in &batch {
            if !present.insert(r.key()) {
                return Err(Error::invalid(format!("record for {} already stored", r.key())));
            }
        }
        let path = self.dir.join(Self::RESULTS);
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for r in &batch {
            let line = serde_json::to_string(r)?;
            writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.records.extend(batch);
        Ok(())
    }

    pub fn log_timings(&self, timings: &[Timing]) -> Result<()> {
        let path = self.dir.join(Self::TIMINGS);
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for t in timings {
            writeln!(w, "{}", serde_json::to_string(t)?).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    /// Every cell the configuration calls for, in canonical order.
    pub fn expected_cells(&self) -> Result<Vec<CellKey>> {
        let cfg = &self.config;
        let mut names = vec![SignalConfig::BASELINE.to_string()];
        names.extend(cfg.signal_configs()?.into_iter().map(|c| c.name));
        let mut out = Vec::new();
        for &rho in &cfg.rho {
            for &clf in &cfg.classifiers {
                for name in &names {
                    for &seed in &cfg.eval_seeds {
                        out.push(CellKey::new(clf, name, seed, rho));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Cells that are absent or failed.
    pub fn missing_cells(&self) -> Result<Vec<CellKey>> {
        let ok: BTreeSet<CellKey> = self.records.iter().filter(|r| r.status == Status::Ok).map(RunRecord::key).collect();
        Ok(self.expected_cells()?.into_iter().filter(|k| !ok.contains(k)).collect())
    }

    pub fn ensure_complete(&self) -> Result<()> {
        let missing = self.missing_cells()?;
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteStore(missing.len(), missing.iter().take(10).map(|k| k.to_string()).collect()))
        }
    }

    pub fn hpo_dir(&self) -> PathBuf {
        self.dir.join("hpo")
    }

    pub fn split_dir(&self) -> PathBuf {
        self.dir.join("splits")
    }

    pub fn graph_dir(&self) -> PathBuf {
        self.dir.join("graphs")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.dir.join("reports")
    }
}
