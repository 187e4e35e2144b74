//! Augmented tabular dataset: base features, appended graph signals, labels,
//! splits and train-only preprocessing.

pub mod preprocess;
pub mod split;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::graph::NodeIds;
use crate::matrix::Matrix;
use crate::signals::NodeSignal;

pub use preprocess::{oversample, prepare, Pca, PcaTarget, PrepConfig, Prepared, Scaler, ScalerMode};
pub use split::{load_split, stratified_split, write_split, SplitSpec};

/// Feature columns `[1, 94)` after the id: the local transaction features,
/// skipping the time step and the aggregated neighborhood block.
pub const DEFAULT_BASE_RANGE: Range<usize> = 1..94;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Illicit,
    Licit,
    Unlabeled,
}

impl Label {
    /// 1 for the positive (illicit) class, 0 for licit.
    pub fn target(self) -> Option<u8> {
        match self {
            Label::Illicit => Some(1),
            Label::Licit => Some(0),
            Label::Unlabeled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub Vec<Label>);

impl LabelVector {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        let v = LabelVector(labels);
        if v.count(Label::Illicit) == 0 || v.count(Label::Licit) == 0 {
            return Err(Error::invalid("labels must contain both illicit and licit nodes"));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, l: Label) -> usize {
        self.0.iter().filter(|&&x| x == l).count()
    }

    pub fn labeled(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, l)| **l != Label::Unlabeled).map(|(i, _)| i)
    }

    /// Binary targets for the given (labeled) rows.
    pub fn targets(&self, idx: &[usize]) -> Vec<u8> {
        idx.iter()
            .map(|&i| self.0[i].target().expect("split rows are labeled"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Base,
    Signal { name: String, embedding: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub provenance: Provenance,
    pub values: Vec<f64>,
}

/// Named node-aligned columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    rows: usize,
    columns: Vec<Column>,
}

impl FeatureTable {
    pub fn new(rows: usize) -> Self {
        FeatureTable { rows, columns: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn push(&mut self, name: impl Into<String>, provenance: Provenance, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: values.len() });
        }
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::DuplicateColumn(name));
        }
        self.columns.push(Column { name, provenance, values });
        Ok(())
    }

    /// Indices of columns contributed by embeddings.
    pub fn embedding_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.provenance, Provenance::Signal { embedding: true, .. }))
            .map(|(j, _)| j)
            .collect()
    }

    /// Row-major matrix of the listed rows.
    pub fn to_matrix(&self, idx: &[usize]) -> Matrix {
        let w = self.width();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            data.extend(self.columns.iter().map(|c| c.values[i]));
        }
        Matrix::new(idx.len(), w, data)
    }

    pub fn full_matrix(&self) -> Matrix {
        self.to_matrix(&(0..self.rows).collect::<Vec<_>>())
    }
}

/// Anything that can be appended to a feature table.
pub enum SignalInput<'a> {
    Indicator(&'a NodeSignal),
    Embedding(&'a Embedding),
}

/// Base columns first, then every signal's columns in list order.
pub fn concat_signals(base: &FeatureTable, signals: &[SignalInput<'_>]) -> Result<FeatureTable> {
    let mut out = base.clone();
    for s in signals {
        match s {
            SignalInput::Indicator(sig) => {
                for (name, col) in &sig.columns {
                    let prov = Provenance::Signal { name: sig.name.clone(), embedding: sig.category.is_embedding() };
                    out.push(name.clone(), prov, col.clone())?;
                }
            }
            SignalInput::Embedding(e) => {
                if e.rows() != base.rows() {
                    return Err(Error::DimensionMismatch { expected: base.rows(), found: e.rows() });
                }
                for j in 0..e.dim() {
                    let col = (0..e.rows()).map(|v| e.row(v)[j]).collect();
                    let prov = Provenance::Signal { name: e.generator.clone(), embedding: true };
                    out.push(format!("{}.{j}", e.generator), prov, col)?;
                }
            }
        }
    }
    Ok(out)
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Reads the Elliptic-style node files. The feature file has no header: node id
/// then feature columns; `base_range` indexes the feature columns after the id.
/// The class file is `id,class` with an optional header row.
pub fn load_node_table(
    features_path: &Path,
    classes_path: &Path,
    base_range: Range<usize>,
) -> Result<(NodeIds, FeatureTable, LabelVector)> {
    let text = fs::read_to_string(features_path).map_err(|e| Error::io(features_path, e))?;
    let mut ids = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); base_range.len()];
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        let n_feat = fields.len() - 1;
        if *width.get_or_insert(n_feat) != n_feat {
            return Err(Error::parse(features_path, lineno + 1, format!("expected {} feature columns, found {n_feat}", width.unwrap())));
        }
        if base_range.end > n_feat {
            return Err(Error::parse(
                features_path,
                lineno + 1,
                format!("base range {base_range:?} exceeds the {n_feat} feature columns"),
            ));
        }
        ids.push(fields[0].to_string());
        for (k, j) in base_range.clone().enumerate() {
            let f = fields[j + 1];
            let x: f64 = f.parse().map_err(|_| {
                Error::parse(features_path, lineno + 1, format!("feature column {j}: non-numeric value {f:?}"))
            })?;
            cols[k].push(x);
        }
    }
    let nodes = NodeIds::from_ids(ids)?;
    let mut table = FeatureTable::new(nodes.len());
    for (k, col) in cols.into_iter().enumerate() {
        table.push(format!("base.{}", base_range.start + k), Provenance::Base, col)?;
    }

    let text = fs::read_to_string(classes_path).map_err(|e| Error::io(classes_path, e))?;
    let mut labels: Vec<Option<Label>> = vec![None; nodes.len()];
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        if fields.len() != 2 {
            return Err(Error::parse(classes_path, lineno + 1, "expected `id,class`"));
        }
        let label = match fields[1] {
            "1" => Label::Illicit,
            "2" => Label::Licit,
            "unknown" => Label::Unlabeled,
            _ if lineno == 0 => continue,
            other => return Err(Error::parse(classes_path, lineno + 1, format!("unknown class {other:?}"))),
        };
        let v = nodes.get(fields[0]).ok_or_else(|| {
            Error::parse(classes_path, lineno + 1, format!("id `{}` not in feature file", fields[0]))
        })?;
        if !seen.insert(v) {
            return Err(Error::parse(classes_path, lineno + 1, format!("id `{}` listed twice", fields[0])));
        }
        labels[v] = Some(label);
    }
    let missing: Vec<&str> = (0..nodes.len()).filter(|&v| labels[v].is_none()).map(|v| nodes.external(v)).take(10).collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("class file lacks ids present in the feature file, e.g. {missing:?}")));
    }
    let labels = LabelVector::new(labels.into_iter().map(Option::unwrap).collect())?;
    Ok((nodes, table, labels))
}

/// Reorders table rows so they follow `target` ids (e.g. the graph's node order).
pub fn align_rows(
    from: &NodeIds,
    table: &FeatureTable,
    labels: &LabelVector,
    target: &NodeIds,
) -> Result<(FeatureTable, LabelVector)> {
    let index: HashMap<&str, usize> = from.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let perm: Vec<usize> = target
        .iter()
        .map(|id| index.get(id).copied().ok_or_else(|| Error::invalid(format!("graph node `{id}` has no feature row"))))
        .collect::<Result<_>>()?;
    if perm.len() != from.len() {
        return Err(Error::invalid(format!(
            "feature file has {} rows but the graph has {} nodes",
            from.len(),
            perm.len()
        )));
    }
    let mut out = FeatureTable::new(perm.len());
    for c in table.columns() {
        out.push(c.name.clone(), c.provenance.clone(), perm.iter().map(|&i| c.values[i]).collect())?;
    }
    let labels = LabelVector(perm.iter().map(|&i| labels.0[i]).collect());
    Ok((out, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{Category, Directedness};

    fn base(rows: usize, width: usize) -> FeatureTable {
        let mut t = FeatureTable::new(rows);
        for j in 0..width {
            t.push(format!("base.{j}"), Provenance::Base, vec![j as f64; rows]).unwrap();
        }
        t
    }

    #[test]
    fn concat_is_additive_and_ordered() {
        let b = base(4, 93);
        let pr = NodeSignal::single("pagerank", "score", Category::Centrality, Directedness::Directed, vec![0.25; 4]);
        let t = concat_signals(&b, &[SignalInput::Indicator(&pr)]).unwrap();
        assert_eq!(t.width(), 94);
        assert_eq!(t.columns()[93].name, "pagerank.score");
        assert_eq!(concat_signals(&b, &[]).unwrap(), b);
        let e = Embedding::new("deepwalk", 0, 2, vec![0.0; 8]);
        let t = concat_signals(&b, &[SignalInput::Embedding(&e), SignalInput::Indicator(&pr)]).unwrap();
        assert_eq!(t.width(), 96);
        assert_eq!(t.embedding_columns(), vec![93, 94]);
    }

    #[test]
    fn duplicate_column_is_rejected() {
        let b = base(2, 1);
        let s = NodeSignal::single("x", "v", Category::Centrality, Directedness::Directed, vec![1.0; 2]);
        assert!(matches!(
            concat_signals(&b, &[SignalInput::Indicator(&s), SignalInput::Indicator(&s)]),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn loads_elliptic_style_files() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("features.csv");
        let c = dir.path().join("classes.csv");
        fs::write(&f, "10,1,0.5,0.25,9\n11,1,1.5,-2,9\n12,2,3,4,9\n").unwrap();
        fs::write(&c, "txId,class\n10,1\n11,2\n12,unknown\n").unwrap();
        let (ids, t, y) = load_node_table(&f, &c, 1..3).unwrap();
        assert_eq!(ids.len(), 3);
        assert_eq!(t.width(), 2);
        assert_eq!(t.columns()[1].values, vec![0.25, -2.0, 4.0]);
        assert_eq!(y.0, vec![Label::Illicit, Label::Licit, Label::Unlabeled]);
    }

    #[test]
    fn load_reports_bad_values_and_id_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("features.csv");
        let c = dir.path().join("classes.csv");
        fs::write(&f, "10,1,0.5\n11,1,x\n").unwrap();
        fs::write(&c, "10,1\n11,2\n").unwrap();
        assert!(matches!(load_node_table(&f, &c, 0..2), Err(Error::Parse { line: 2, .. })));
        fs::write(&f, "10,1,0.5\n11,1,2\n").unwrap();
        fs::write(&c, "10,1\n99,2\n").unwrap();
        assert!(load_node_table(&f, &c, 0..2).is_err());
    }
}
