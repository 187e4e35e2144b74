//! Train-only preprocessing: scaling, embedding PCA, minority oversampling.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::SplitSpec;
use super::{FeatureTable, LabelVector};
use crate::matrix::{Matrix, RowSource};
use crate::rng::{stream_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerMode {
    Standard,
    Minmax,
}

/// Per-column affine map `(x - offset) * factor`; a zero factor sends the column to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mode: ScalerMode,
    offset: Vec<f64>,
    factor: Vec<f64>,
}

impl Scaler {
    pub fn fit(src: &impl RowSource, train: &[usize], mode: ScalerMode) -> Scaler {
        let d = src.n_cols();
        let n = train.len().max(1) as f64;
        let (mut offset, mut factor) = (vec![0.0; d], vec![0.0; d]);
        match mode {
            ScalerMode::Standard => {
                let mut sum = vec![0.0; d];
                for &i in train {
                    for (s, x) in sum.iter_mut().zip(src.row(i)) {
                        *s += x;
                    }
                }
                let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
                let mut ss = vec![0.0; d];
                for &i in train {
                    for ((s, x), m) in ss.iter_mut().zip(src.row(i)).zip(&mean) {
                        *s += (x - m) * (x - m);
                    }
                }
                for j in 0..d {
                    let sd = (ss[j] / n).sqrt();
                    offset[j] = mean[j];
                    factor[j] = if sd > 1e-12 * mean[j].abs().max(1.0) { 1.0 / sd } else { 0.0 };
                }
            }
            ScalerMode::Minmax => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for &i in train {
                    for (j, &x) in src.row(i).iter().enumerate() {
                        lo[j] = lo[j].min(x);
                        hi[j] = hi[j].max(x);
                    }
                }
                for j in 0..d {
                    let range = hi[j] - lo[j];
                    offset[j] = if lo[j].is_finite() { lo[j] } else { 0.0 };
                    factor[j] = if range > 0.0 { 1.0 / range } else { 0.0 };
                }
            }
        }
        Scaler { mode, offset, factor }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, o), f) in out.row_mut(i).iter_mut().zip(&self.offset).zip(&self.factor) {
                *v = (*v - o) * f;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaTarget {
    Components(usize),
    /// Smallest number of components reaching this share of train variance.
    Variance(f64),
}

/// Projection of a column subset onto its leading principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub cols: Vec<usize>,
    mean: Vec<f64>,
    /// `k` loadings of length `cols.len()`.
    components: Vec<Vec<f64>>,
    pub explained: Vec<f64>,
}

impl Pca {
    pub fn fit(src: &impl RowSource, train: &[usize], cols: &[usize], target: PcaTarget) -> Pca {
        let d = cols.len();
        let n = train.len();
        let mut mean = vec![0.0; d];
        for &i in train {
            let r = src.row(i);
            for (m, &c) in mean.iter_mut().zip(cols) {
                *m += r[c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut centered = vec![0.0; d];
        for &i in train {
            let r = src.row(i);
            for (k, &c) in cols.iter().enumerate() {
                centered[k] = r[c] - mean[k];
            }
            for a in 0..d {
                let xa = centered[a];
                for b in a..d {
                    cov[(a, b)] += xa * centered[b];
                }
            }
        }
        let denom = n.saturating_sub(1).max(1) as f64;
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let k = match target {
            PcaTarget::Components(k) => {
                if k > d {
                    warn!("PCA asked for {k} components of {d} columns; using {d}");
                }
                k.min(d)
            }
            PcaTarget::Variance(frac) => {
                let total: f64 = values.iter().sum();
                let mut acc = 0.0;
                let mut k = d;
                for (i, v) in values.iter().enumerate() {
                    acc += v;
                    if acc >= frac * total {
                        k = i + 1;
                        break;
                    }
                }
                k.max(1).min(d)
            }
        };
        let components = order[..k]
            .iter()
            .map(|&i| {
                let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                if let Some(x) = v.iter().find(|x| x.abs() > 1e-12) {
                    if *x < 0.0 {
                        v.iter_mut().for_each(|y| *y = -*y);
                    }
                }
                v
            })
            .collect();
        Pca { cols: cols.to_vec(), mean, components, explained: values[..k].to_vec() }
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Replaces the fitted columns by the component scores, appended after the
    /// untouched columns.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let keep: Vec<usize> = (0..x.cols()).filter(|j| !self.cols.contains(j)).collect();
        let width = keep.len() + self.n_components();
        let mut out = Matrix::zeros(x.rows(), width);
        for i in 0..x.rows() {
            let r = x.row(i);
            let o = out.row_mut(i);
            for (k, &j) in keep.iter().enumerate() {
                o[k] = r[j];
            }
            for (k, comp) in self.components.iter().enumerate() {
                o[keep.len() + k] = comp
                    .iter()
                    .zip(&self.cols)
                    .zip(&self.mean)
                    .map(|((w, &c), m)| w * (r[c] - m))
                    .sum();
            }
        }
        out
    }

    /// Maps scores back to the original embedding columns.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (s, comp) in scores.iter().zip(&self.components) {
            for (o, w) in out.iter_mut().zip(comp) {
                *o += s * w;
            }
        }
        out
    }
}

/// Appends minority rows drawn with replacement until the minority count
/// reaches `round(ratio * majority)`. Original rows come first, unchanged.
pub fn oversample(x: &Matrix, y: &[u8], ratio: f64, seed: u64) -> (Matrix, Vec<u8>) {
    assert!(ratio > 0.0 && ratio <= 1.0, "oversample ratio must be in (0, 1]");
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    let (minority, majority, label) = if pos.len() <= neg.len() { (&pos, neg.len(), 1) } else { (&neg, pos.len(), 0) };
    let goal = (ratio * majority as f64).round() as usize;
    if minority.is_empty() || goal <= minority.len() {
        return (x.clone(), y.to_vec());
    }
    let mut rng = stream_rng(&[tag("oversample"), seed]);
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.extend((0..goal - minority.len()).map(|_| minority[rng.random_range(0..minority.len())]));
    let mut labels = y.to_vec();
    labels.extend(std::iter::repeat_n(label, goal - minority.len()));
    (x.select_rows(&idx), labels)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrepConfig {
    pub scaler: Option<ScalerMode>,
    pub pca: Option<PcaTarget>,
    pub oversample: Option<f64>,
    pub seed: u64,
}

/// Transform chain fitted on train rows: PCA over the embedding columns, then
/// the scaler over the resulting matrix.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pca: Option<Pca>,
    scaler: Option<Scaler>,
}

impl Preprocessor {
    pub fn fit(src: &impl RowSource, train: &[usize], embedding_cols: &[usize], cfg: &PrepConfig) -> Preprocessor {
        let pca = match cfg.pca {
            Some(t) if !embedding_cols.is_empty() => Some(Pca::fit(src, train, embedding_cols, t)),
            _ => None,
        };
        let scaler = cfg.scaler.map(|mode| match &pca {
            None => Scaler::fit(src, train, mode),
            Some(p) => {
                let rows: Vec<Vec<f64>> = train.iter().map(|&i| src.row(i).to_vec()).collect();
                let reduced = p.apply(&Matrix::from_rows(&rows));
                let all: Vec<usize> = (0..reduced.rows()).collect();
                Scaler::fit(&reduced, &all, mode)
            }
        });
        Preprocessor { pca, scaler }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let x = match &self.pca {
            Some(p) => p.apply(x),
            None => x.clone(),
        };
        match &self.scaler {
            Some(s) => s.apply(&x),
            None => x,
        }
    }

    pub fn pca(&self) -> Option<&Pca> {
        self.pca.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub x_train: Matrix,
    pub y_train: Vec<u8>,
    pub x_val: Matrix,
    pub y_val: Vec<u8>,
    pub x_test: Matrix,
    pub y_test: Vec<u8>,
}

/// Builds model-ready matrices. The chain is fitted on the original train rows;
/// oversampling then duplicates transformed train rows.
pub fn prepare(table: &FeatureTable, labels: &LabelVector, split: &SplitSpec, cfg: &PrepConfig) -> Prepared {
    let full = table.full_matrix();
    let prep = Preprocessor::fit(&full, &split.train, &table.embedding_columns(), cfg);
    let part = |idx: &[usize]| (prep.apply(&full.select_rows(idx)), labels.targets(idx));
    let (x_train, y_train) = part(&split.train);
    let (x_train, y_train) = match cfg.oversample {
        Some(r) => oversample(&x_train, &y_train, r, cfg.seed),
        None => (x_train, y_train),
    };
    let (x_val, y_val) = part(&split.val);
    let (x_test, y_test) = part(&split.test);
    Prepared { x_train, y_train, x_val, y_val, x_test, y_test }
}
