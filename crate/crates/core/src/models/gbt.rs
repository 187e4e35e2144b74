//! Histogram gradient-boosted trees on the logistic loss.

use rand::seq::index::sample;

use super::ModelSpec;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::{stream_rng, tag};

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub min_child_weight: f64,
    /// Minimum loss reduction per split.
    pub gamma: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.3,
            subsample: 1.0,
            colsample_bytree: 1.0,
            min_child_weight: 1.0,
            gamma: 0.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
        }
    }
}

impl GbtParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = GbtParams::default();
        Ok(GbtParams {
            n_estimators: spec.int("n_estimators", d.n_estimators as i64)?.max(0) as usize,
            max_depth: spec.int("max_depth", d.max_depth as i64)?.max(1) as usize,
            learning_rate: spec.float("learning_rate", d.learning_rate)?,
            subsample: spec.float("subsample", d.subsample)?,
            colsample_bytree: spec.float("colsample_bytree", d.colsample_bytree)?,
            min_child_weight: spec.float("min_child_weight", d.min_child_weight)?,
            gamma: spec.float("gamma", d.gamma)?,
            reg_alpha: spec.float("reg_alpha", d.reg_alpha)?,
            reg_lambda: spec.float("reg_lambda", d.reg_lambda)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegTree {
    nodes: Vec<Node>,
}

impl RegTree {
    fn predict_row(&self, r: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    k = if r[feature] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Booster {
    pub base_score: f64,
    pub trees: Vec<RegTree>,
}

/// Per-feature upper bin edges from train quantiles; the last bin is open.
struct Bins {
    edges: Vec<Vec<f64>>,
    /// Column-major bin codes.
    codes: Vec<Vec<u8>>,
}

impl Bins {
    fn new(x: &Matrix) -> Bins {
        let (n, d) = (x.rows(), x.cols());
        let mut edges = Vec::with_capacity(d);
        let mut codes: Vec<Vec<u8>> = Vec::with_capacity(d);
        for j in 0..d {
            let mut col = x.column(j);
            let raw = col.clone();
            col.sort_by(f64::total_cmp);
            col.dedup();
            let e: Vec<f64> = if col.len() <= MAX_BINS {
                col.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
            } else {
                let mut e: Vec<f64> = (1..MAX_BINS)
                    .map(|q| {
                        let k = q * col.len() / MAX_BINS;
                        col[k - 1] + (col[k] - col[k - 1]) / 2.0
                    })
                    .collect();
                e.dedup();
                e
            };
            codes.push(raw.iter().map(|v| e.partition_point(|t| t < v) as u8).collect());
            edges.push(e);
            debug_assert_eq!(codes[j].len(), n);
        }
        Bins { edges, codes }
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

struct TreeBuilder<'a> {
    bins: &'a Bins,
    grad: &'a [f64],
    hess: &'a [f64],
    features: Vec<usize>,
    p: GbtParams,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let t = soft_threshold(g, self.p.reg_alpha);
        t * t / (h + self.p.reg_lambda)
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -soft_threshold(g, self.p.reg_alpha) / (h + self.p.reg_lambda) * self.p.learning_rate
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.grad[i], b + self.hess[i]));
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(self.leaf_value(g, h)));
        if depth >= self.p.max_depth || rows.len() < 2 {
            return id;
        }
        let parent = self.score(g, h);
        let mut best: Option<(usize, usize, f64)> = None;
        let mut hist_g = [0.0f64; MAX_BINS];
        let mut hist_h = [0.0f64; MAX_BINS];
        for &f in &self.features {
            let nb = self.bins.edges[f].len() + 1;
            if nb < 2 {
                continue;
            }
            hist_g[..nb].fill(0.0);
            hist_h[..nb].fill(0.0);
            let codes = &self.bins.codes[f];
            for &i in &rows {
                let b = codes[i] as usize;
                hist_g[b] += self.grad[i];
                hist_h[b] += self.hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..nb - 1 {
                gl += hist_g[b];
                hl += hist_h[b];
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.p.min_child_weight || hr < self.p.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.p.gamma;
                if gain > 1e-12 && best.is_none_or(|x| gain > x.2) {
                    best = Some((f, b, gain));
                }
            }
        }
        let Some((feature, bin, _)) = best else {
            return id;
        };
        let codes = &self.bins.codes[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| codes[i] as usize <= bin);
        let threshold = self.bins.edges[feature][bin];
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split { feature, threshold, left, right };
        id
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn fit(p: &GbtParams, x: &Matrix, y: &[u8], seed: u64) -> Booster {
    let (n, d) = (x.rows(), x.cols());
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let base_score = (prior / (1.0 - prior)).ln();
    let bins = Bins::new(x);
    let mut f = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(p.n_estimators);
    for round in 0..p.n_estimators {
        for i in 0..n {
            let q = sigmoid(f[i]);
            grad[i] = q - y[i] as f64;
            hess[i] = (q * (1.0 - q)).max(1e-16);
        }
        let mut rng = stream_rng(&[tag("gbt"), seed, round as u64]);
        let rows: Vec<usize> = if p.subsample < 1.0 {
            let k = ((p.subsample * n as f64).round() as usize).clamp(1, n);
            let mut r = sample(&mut rng, n, k).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let features: Vec<usize> = if p.colsample_bytree < 1.0 {
            let k = ((p.colsample_bytree * d as f64).round() as usize).clamp(1, d);
            let mut c = sample(&mut rng, d, k).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..d).collect()
        };
        let mut b = TreeBuilder { bins: &bins, grad: &grad, hess: &hess, features, p: *p, nodes: Vec::new() };
        b.grow(rows, 0);
        let tree = RegTree { nodes: b.nodes };
        for i in 0..n {
            f[i] += tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Booster { base_score, trees }
}

impl Booster {
    pub fn decision(&self, r: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>()
    }

    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| sigmoid(self.decision(r))).collect()
    }
}
