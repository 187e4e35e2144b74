//! Delimited report tables derived from a complete store.
//!
//! Every file starts with `#` comment lines (store name, classifier
//! substitutions, Naive Bayes handling) followed by one CSV header row.
//!
//! | kind | columns |
//! |------|---------|
//! | `matrix-mean-std` | `rho,classifier,baseline,<config>...`; cells `mean ± std` of F1 over the trimmed runs |
//! | `significance-matrix` | `rho,classifier,<config>...`; cells `n_better / n_worse` |
//! | `category-delta` | `rho,category,n_cells,mean_delta_f1` |
//! | `robustness-trend` | `level,name,rho,n_cells,mean_delta_f1,change_vs_rho0` |
//! | `peak-per-category` | `rho,category,peak_f1,classifier,config,baseline_f1` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::SignalConfig;
use super::store::{ResultStore, SUBSTITUTIONS};
use crate::error::{Error, Result};
use crate::models::Family;
use crate::signals::Category;
use crate::stats::{delta_f1, significance_counts, trimmed_mean, trimmed_std, McNemarResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    CategoryDelta,
    MatrixMeanStd,
    SignificanceMatrix,
    RobustnessTrend,
    PeakPerCategory,
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] = [
        ReportKind::CategoryDelta,
        ReportKind::MatrixMeanStd,
        ReportKind::SignificanceMatrix,
        ReportKind::RobustnessTrend,
        ReportKind::PeakPerCategory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::CategoryDelta => "category-delta",
            ReportKind::MatrixMeanStd => "matrix-mean-std",
            ReportKind::SignificanceMatrix => "significance-matrix",
            ReportKind::RobustnessTrend => "robustness-trend",
            ReportKind::PeakPerCategory => "peak-per-category",
        }
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown report kind `{s}`")))
    }
}

/// Aggregate of one (rho, classifier, configuration) over the evaluation seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub rho: f64,
    pub classifier: Family,
    pub config: String,
    pub category: Option<Category>,
    pub f1: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Trimmed mean minus the baseline's; zero for baseline rows.
    pub delta: f64,
    pub n_better: usize,
    pub n_worse: usize,
}

/// Per-cell aggregates in canonical order (rho, classifier, baseline first).
pub fn summarize(store: &ResultStore) -> Result<Vec<CellSummary>> {
    store.ensure_complete()?;
    let cfg = &store.config;
    let mut by_cell: BTreeMap<(u64, Family, &str), BTreeMap<u64, (f64, Option<McNemarResult>)>> = BTreeMap::new();
    for r in store.records() {
        if let Some(m) = r.metrics {
            by_cell.entry((r.rho.to_bits(), r.classifier, r.config.as_str())).or_default().insert(r.seed, (m.f1, r.mcnemar));
        }
    }
    let mut configs = vec![SignalConfig::baseline()];
    configs.extend(cfg.signal_configs()?);
    let mut out = Vec::new();
    for &rho in &cfg.rho {
        for &clf in &cfg.classifiers {
            let mut base_mean = None;
            for k in &configs {
                let runs = &by_cell[&(rho.to_bits(), clf, k.name.as_str())];
                let f1: Vec<f64> = cfg.eval_seeds.iter().map(|s| runs[s].0).collect();
                let tests: Vec<McNemarResult> = cfg.eval_seeds.iter().filter_map(|s| runs[s].1).collect();
                if !k.is_baseline() && tests.len() != cfg.eval_seeds.len() {
                    return Err(Error::invalid(format!("{clf}/{} at rho={rho} lacks paired tests", k.name)));
                }
                let mean = trimmed_mean(&f1)?;
                let std = trimmed_std(&f1)?;
                let base = *base_mean.get_or_insert(mean);
                let sig = significance_counts(&tests);
                out.push(CellSummary {
                    rho,
                    classifier: clf,
                    config: k.name.clone(),
                    category: k.category,
                    f1,
                    mean,
                    std,
                    delta: if k.is_baseline() { 0.0 } else { delta_f1(mean, base) },
                    n_better: sig.n_better,
                    n_worse: sig.n_worse,
                });
            }
        }
    }
    Ok(out)
}

fn header(store: &ResultStore, kind: ReportKind, out: &mut String) {
    let _ = writeln!(out, "# {} report for store `{}`", kind.name(), store.manifest.name);
    for s in SUBSTITUTIONS {
        let _ = writeln!(out, "# substitution: {s}");
    }
    if store.config.report.exclude_nb {
        let _ = writeln!(out, "# naive bayes (gnb) excluded from aggregates");
    }
}

fn aggregated(store: &ResultStore, c: &CellSummary) -> bool {
    !(store.config.report.exclude_nb && c.classifier == Family::Gnb)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Renders one report as text.
pub fn render(store: &ResultStore, kind: ReportKind) -> Result<String> {
    let cells = summarize(store)?;
    let cfg = &store.config;
    let names: Vec<String> = cfg.signal_configs()?.into_iter().map(|c| c.name).collect();
    let lookup: BTreeMap<(u64, Family, &str), &CellSummary> =
        cells.iter().map(|c| ((c.rho.to_bits(), c.classifier, c.config.as_str()), c)).collect();
    let mut out = String::new();
    header(store, kind, &mut out);
    match kind {
        ReportKind::MatrixMeanStd | ReportKind::SignificanceMatrix => {
            let mut cols = vec!["rho".to_string(), "classifier".to_string()];
            if kind == ReportKind::MatrixMeanStd {
                cols.push(SignalConfig::BASELINE.into());
            }
            cols.extend(names.iter().cloned());
            let _ = writeln!(out, "{}", cols.join(","));
            for &rho in &cfg.rho {
                for &clf in &cfg.classifiers {
                    let mut row = vec![format!("{rho}"), clf.to_string()];
                    for name in &cols[2..] {
                        let c = lookup[&(rho.to_bits(), clf, name.as_str())];
                        row.push(match kind {
                            ReportKind::MatrixMeanStd => format!("{:.4} ± {:.4}", c.mean, c.std),
                            _ => format!("{} / {}", c.n_better, c.n_worse),
                        });
                    }
                    let _ = writeln!(out, "{}", row.join(","));
                }
            }
        }
        ReportKind::CategoryDelta => {
            let _ = writeln!(out, "rho,category,n_cells,mean_delta_f1");
            for &rho in &cfg.rho {
                let at: Vec<&CellSummary> = cells
                    .iter()
                    .filter(|c| c.rho == rho && c.category.is_some() && aggregated(store, c))
                    .collect();
                for cat in Category::ALL {
                    let d: Vec<f64> = at.iter().filter(|c| c.category == Some(cat)).map(|c| c.delta).collect();
                    if !d.is_empty() {
                        let _ = writeln!(out, "{rho},{cat},{},{:.6}", d.len(), mean(&d));
                    }
                }
            }
        }
        ReportKind::RobustnessTrend => {
            let _ = writeln!(out, "level,name,rho,n_cells,mean_delta_f1,change_vs_rho0");
            let augmented: Vec<&CellSummary> =
                cells.iter().filter(|c| c.config != SignalConfig::BASELINE && aggregated(store, c)).collect();
            let mut groups: Vec<(&str, String, Box<dyn Fn(&CellSummary) -> bool>)> = Vec::new();
            for cat in Category::ALL {
                groups.push(("category", cat.to_string(), Box::new(move |c: &CellSummary| c.category == Some(cat))));
            }
            for name in &names {
                let n = name.clone();
                groups.push(("config", name.clone(), Box::new(move |c: &CellSummary| c.config == n)));
            }
            for (level, name, pick) in groups {
                let at = |rho: f64| -> Vec<f64> {
                    augmented.iter().filter(|c| c.rho == rho && pick(c)).map(|c| c.delta).collect()
                };
                let zero = at(0.0);
                for &rho in &cfg.rho {
                    let d = at(rho);
                    if d.is_empty() {
                        continue;
                    }
                    let change = if zero.is_empty() { String::new() } else { format!("{:.6}", mean(&d) - mean(&zero)) };
                    let _ = writeln!(out, "{level},{name},{rho},{},{:.6},{change}", d.len(), mean(&d));
                }
            }
        }
        ReportKind::PeakPerCategory => {
            let _ = writeln!(out, "rho,category,peak_f1,classifier,config,baseline_f1");
            for &rho in &cfg.rho {
                let at: Vec<&CellSummary> = cells.iter().filter(|c| c.rho == rho && aggregated(store, c)).collect();
                let base = at
                    .iter()
                    .filter(|c| c.config == SignalConfig::BASELINE)
                    .map(|c| c.mean)
                    .fold(f64::NEG_INFINITY, f64::max);
                for cat in Category::ALL {
                    let best = at
                        .iter()
                        .filter(|c| c.category == Some(cat))
                        .min_by(|a, b| b.mean.total_cmp(&a.mean));
                    if let Some(b) = best {
                        let _ = writeln!(out, "{rho},{cat},{:.6},{},{},{:.6}", b.mean, b.classifier, b.config, base);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Writes `<dir>/<kind>.csv` and returns its path.
pub fn write_report(store: &ResultStore, kind: ReportKind, dir: &Path) -> Result<PathBuf> {
    let text = render(store, kind)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.csv", kind.name()));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
