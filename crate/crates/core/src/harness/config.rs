//! TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! name = "planted"
//! classifiers = ["random_forest", "logreg"]
//! signals = ["louvain", "node2vec_balanced"]   # one configuration each
//! eval_seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! rho = [0.0, 0.25, 0.5]
//!
//! [[groups]]                                      # multi-signal configurations
//! name = "community"
//! signals = ["louvain", "leiden", "infomap"]
//!
//! [synthetic]                                     # or [dataset] with file paths
//! n = 2000
//!
//! [embeddings]                                    # external GNN exports
//! gcn = "exports/gcn.csv"
//! ```
//!
//! Relative paths resolve against the configuration file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::SyntheticSpec;
use crate::assembly::DEFAULT_BASE_RANGE;
use crate::error::{Error, Result};
use crate::models::Family;
use crate::signals::{Category, SignalKind};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub classes: PathBuf,
    /// Feature columns (after the id) used as base features, half-open.
    #[serde(default = "default_base_range")]
    pub base_range: [usize; 2],
}

fn default_base_range() -> [usize; 2] {
    [DEFAULT_BASE_RANGE.start, DEFAULT_BASE_RANGE.end]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    #[serde(default = "yes")]
    pub exclude_nb: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { exclude_nb: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub dataset: Option<DatasetPaths>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    pub classifiers: Vec<Family>,
    #[serde(default)]
    pub signals: Vec<String>,
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
    /// Signal name to embedding file, for signals computed elsewhere.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    #[serde(default = "default_hpo_seed")]
    pub hpo_seed: u64,
    #[serde(default = "default_eval_seeds")]
    pub eval_seeds: Vec<u64>,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "default_hpo_budget")]
    pub hpo_budget: usize,
    #[serde(default = "default_hpo_startup")]
    pub hpo_startup: usize,
    /// Seed of the stochastic signal generators.
    #[serde(default = "default_hpo_seed")]
    pub signal_seed: u64,
    /// Seed of the edge-removal draws.
    #[serde(default = "default_hpo_seed")]
    pub perturb_seed: u64,
    #[serde(default)]
    pub report: ReportOptions,
    /// Not part of the configuration identity.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_hpo_seed() -> u64 {
    42
}
fn default_eval_seeds() -> Vec<u64> {
    (1..=10).collect()
}
fn default_rho() -> Vec<f64> {
    vec![0.0]
}
fn default_hpo_budget() -> usize {
    50
}
fn default_hpo_startup() -> usize {
    20
}

/// One augmentation: a named set of signals concatenated onto the base features.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignalConfig {
    pub name: String,
    pub signals: Vec<SignalKind>,
    pub category: Option<Category>,
}

impl SignalConfig {
    pub const BASELINE: &'static str = "baseline";

    pub fn baseline() -> Self {
        SignalConfig { name: Self::BASELINE.into(), signals: Vec::new(), category: None }
    }

    pub fn is_baseline(&self) -> bool {
        self.signals.is_empty()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.dataset {
            fix(&mut d.edges);
            fix(&mut d.features);
            fix(&mut d.classes);
        }
        self.embeddings.values_mut().for_each(fix);
        if let Some(o) = &mut self.output {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return err(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => return err("give either [dataset] or [synthetic], not both".into()),
            (None, None) => return err("missing [dataset] or [synthetic] section".into()),
            (Some(d), None) if d.base_range[0] >= d.base_range[1] => {
                return err(format!("empty base_range {:?}", d.base_range))
            }
            (None, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.classifiers.is_empty() {
            return err("no classifiers listed".into());
        }
        if self.eval_seeds.is_empty() {
            return err("eval_seeds is empty".into());
        }
        let distinct: BTreeSet<u64> = self.eval_seeds.iter().copied().collect();
        if distinct.len() != self.eval_seeds.len() {
            return err(format!("eval_seeds contains duplicates: {:?}", self.eval_seeds));
        }
        if self.rho.is_empty() {
            return err("rho list is empty".into());
        }
        if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return err(format!("perturbation level {r} outside [0, 1]"));
        }
        let mut seen = BTreeSet::new();
        for r in &self.rho {
            if !seen.insert(r.to_bits()) {
                return err(format!("perturbation level {r} listed twice"));
            }
        }
        if self.hpo_budget == 0 {
            return err("hpo_budget must be positive".into());
        }
        let classes: BTreeSet<Family> = self.classifiers.iter().copied().collect();
        if classes.len() != self.classifiers.len() {
            return err("classifier listed twice".into());
        }
        let configs = self.signal_configs()?;
        if configs.is_empty() {
            return err("no signal configurations".into());
        }
        let mut names = BTreeSet::new();
        for c in &configs {
            if c.name == SignalConfig::BASELINE || !names.insert(c.name.clone()) {
                return err(format!("signal configuration name `{}` is reserved or repeated", c.name));
            }
            for s in &c.signals {
                if s.is_external() && !self.embeddings.contains_key(s.name()) {
                    return err(format!("signal `{s}` needs an embedding file under [embeddings]"));
                }
            }
        }
        for name in self.embeddings.keys() {
            let kind: SignalKind = name.parse()?;
            if !kind.is_embedding() {
                return err(format!("`{name}` is not an embedding signal"));
            }
        }
        Ok(())
    }

    /// Single-signal configurations in listed order, then the groups.
    pub fn signal_configs(&self) -> Result<Vec<SignalConfig>> {
        let mut out = Vec::new();
        for s in &self.signals {
            let kind: SignalKind = s.parse()?;
            out.push(SignalConfig { name: kind.name().into(), signals: vec![kind], category: Some(kind.category()) });
        }
        for g in &self.groups {
            let kinds: Vec<SignalKind> = g.signals.iter().map(|s| s.parse()).collect::<Result<_>>()?;
            if kinds.is_empty() {
                return Err(Error::Config(format!("group `{}` has no signals", g.name)));
            }
            let cats: BTreeSet<Category> = kinds.iter().map(|k| k.category()).collect();
            let category = if cats.len() == 1 { cats.into_iter().next() } else { None };
            out.push(SignalConfig { name: g.name.clone(), signals: kinds, category });
        }
        Ok(out)
    }

    /// Every distinct signal any configuration needs.
    pub fn required_signals(&self) -> Result<BTreeSet<SignalKind>> {
        Ok(self.signal_configs()?.into_iter().flat_map(|c| c.signals).collect())
    }

    /// Canonical JSON: fixed field order, maps sorted, output location dropped.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Number of records a complete run produces.
    pub fn expected_records(&self) -> Result<usize> {
        Ok(self.classifiers.len() * (self.signal_configs()?.len() + 1) * self.eval_seeds.len() * self.rho.len())
    }
}

/// Generator parameters from a TOML table (missing keys take defaults).
pub fn synthetic_from_toml(text: &str) -> Result<SyntheticSpec> {
    let spec: SyntheticSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Parses `1..10` (inclusive), `3` or `1,4,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        version = 1
        classifiers = ["random_forest", "logreg"]
        signals = ["degree", "louvain", "node2vec_balanced"]
        [synthetic]
        n = 500
    "#;

    #[test]
    fn defaults_follow_protocol() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.hpo_seed, 42);
        assert_eq!(cfg.eval_seeds, (1..=10).collect::<Vec<_>>());
        assert_eq!(cfg.rho, vec![0.0]);
        assert!(cfg.report.exclude_nb);
        assert_eq!(cfg.expected_records().unwrap(), 2 * 4 * 10);
    }

    #[test]
    fn groups_carry_a_category_when_homogeneous() {
        let text = MINIMAL.replace(
            "[synthetic]",
            "[[groups]]\nname = \"community\"\nsignals = [\"louvain\", \"leiden\"]\n\
             [[groups]]\nname = \"mix\"\nsignals = [\"degree\", \"spectral\"]\n[synthetic]",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let c = cfg.signal_configs().unwrap();
        assert_eq!(c[3].category, Some(Category::Community));
        assert_eq!(c[4].category, None);
        assert_eq!(cfg.required_signals().unwrap().len(), 5);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            MINIMAL.replace("signals = [\"degree\"", "signals = [\"nope\""),
            MINIMAL.replace("version = 1", "version = 2"),
            MINIMAL.replace("classifiers = [\"random_forest\", \"logreg\"]", "classifiers = []"),
            format!("eval_seeds = [1, 1]\n{MINIMAL}"),
            format!("rho = [0.0, 1.5]\n{MINIMAL}"),
            MINIMAL.replace("node2vec_balanced", "gcn"),
            format!("bogus = 3\n{MINIMAL}"),
        ];
        for text in cases {
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn digest_ignores_output_location_only() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.digest(), b.digest());
        b.hpo_seed = 43;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..10").unwrap(), (1..=10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..1").is_err());
    }
}
