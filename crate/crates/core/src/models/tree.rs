//! Gini CART trees and bootstrap random forests.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::{sample_weights, Balancing, ModelSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_samples_split: 2, min_samples_leaf: 1, max_features: MaxFeatures::Sqrt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub class_weights: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_estimators: 100, tree: TreeParams::default(), class_weights: false }
    }
}

impl ForestParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let max_features = match spec.string("max_features", "sqrt")?.as_str() {
            "sqrt" => MaxFeatures::Sqrt,
            "log2" => MaxFeatures::Log2,
            "none" | "None" => MaxFeatures::All,
            other => return Err(Error::Config(format!("unknown max_features `{other}`"))),
        };
        let positive = |v: i64, name: &str| {
            usize::try_from(v).ok().filter(|&u| u >= 1).ok_or_else(|| Error::Config(format!("{name} must be positive")))
        };
        Ok(ForestParams {
            n_estimators: positive(spec.int("n_estimators", 100)?, "n_estimators")?,
            tree: TreeParams {
                max_depth: spec.opt_int("max_depth", None)?.map(|d| positive(d, "max_depth")).transpose()?,
                min_samples_split: positive(spec.int("min_samples_split", 2)?, "min_samples_split")?.max(2),
                min_samples_leaf: positive(spec.int("min_samples_leaf", 1)?, "min_samples_leaf")?,
                max_features,
            },
            class_weights: spec.balancing()? == Balancing::ClassWeights,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

/// Binary classification tree; leaves hold the weighted positive fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, r: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(r)] {
            Node::Leaf(v) => v,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_index(&self, r: &[f64]) -> usize {
        let mut k = 0usize;
        loop {
            match self.nodes[k] {
                Node::Leaf(_) => return k,
                Node::Split { feature, threshold, left, right } => {
                    k = if r[feature] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left as usize).max(walk(t, right as usize)),
            }
        }
        walk(self, 0)
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, R: Rng> {
    x: &'a Matrix,
    y: &'a [u8],
    w: &'a [f64],
    p: TreeParams,
    rng: R,
    nodes: Vec<Node>,
    order: Vec<(f64, usize)>,
}

impl<R: Rng> Builder<'_, R> {
    fn stats(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(p, t), &i| (p + self.w[i] * self.y[i] as f64, t + self.w[i]))
    }

    fn best_split(&mut self, idx: &[usize], pos: f64, total: f64) -> Option<(usize, f64, f64)> {
        let d = self.x.cols();
        let k = self.p.max_features.count(d);
        let parent = gini(pos, total) * total;
        let mut best: Option<(usize, f64, f64)> = None;
        let leaf = self.p.min_samples_leaf;
        for f in sample(&mut self.rng, d, k).into_iter() {
            self.order.clear();
            self.order.extend(idx.iter().map(|&i| (self.x.get(i, f), i)));
            self.order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut lp, mut lt) = (0.0, 0.0);
            for s in 0..self.order.len() - 1 {
                let (v, i) = self.order[s];
                lp += self.w[i] * self.y[i] as f64;
                lt += self.w[i];
                let next = self.order[s + 1].0;
                if next <= v || s + 1 < leaf || self.order.len() - s - 1 < leaf {
                    continue;
                }
                let (rp, rt) = (pos - lp, total - lt);
                let child = gini(lp, lt) * lt + gini(rp, rt) * rt;
                let gain = parent - child;
                if gain > 1e-12 * total && best.is_none_or(|b| gain > b.2) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> u32 {
        let (pos, total) = self.stats(&idx);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(if total > 0.0 { pos / total } else { 0.0 }));
        let pure = pos <= 0.0 || pos >= total;
        let deep = self.p.max_depth.is_some_and(|m| depth >= m);
        if pure || deep || idx.len() < self.p.min_samples_split || idx.len() < 2 * self.p.min_samples_leaf {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&idx, pos, total) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        drop(idx);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Grows one tree on the rows `idx` (with multiplicity carried by `w`).
pub fn fit_tree(x: &Matrix, y: &[u8], w: &[f64], idx: Vec<usize>, p: TreeParams, rng: impl Rng) -> Tree {
    let mut b = Builder { x, y, w, p, rng, nodes: Vec::new(), order: Vec::new() };
    b.grow(idx, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

/// Each tree draws its bootstrap sample and feature subsets from a stream keyed
/// by (seed, tree index), so the forest does not depend on thread scheduling.
pub fn fit_forest(p: &ForestParams, x: &Matrix, y: &[u8], seed: u64) -> RandomForest {
    fit_forest_with_weights(p, x, y, &sample_weights(y, p.class_weights), seed)
}

/// Forest whose bootstrap multiplicities are scaled by explicit row weights.
pub fn fit_forest_with_weights(p: &ForestParams, x: &Matrix, y: &[u8], class_w: &[f64], seed: u64) -> RandomForest {
    let n = x.rows();
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(&[tag("forest"), seed, t as u64]);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let idx: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            let w: Vec<f64> = (0..n).map(|i| counts[i] as f64 * class_w[i]).collect();
            fit_tree(x, y, &w, idx, p.tree, rng)
        })
        .collect();
    RandomForest { trees }
}

impl RandomForest {
    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.iter_rows()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tree_memorizes_distinct_rows() {
        let x = Matrix::new(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0, 1, 0, 1, 1, 0];
        let p = TreeParams { max_features: MaxFeatures::All, ..TreeParams::default() };
        let t = fit_tree(&x, &y, &[1.0; 6], (0..6).collect(), p, stream_rng(&[1]));
        for i in 0..6 {
            assert_eq!(t.predict_row(x.row(i)), y[i] as f64);
        }
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        let x = Matrix::new(40, 1, (0..40).map(|i| i as f64).collect());
        let y: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
        let p = TreeParams { max_depth: Some(3), min_samples_leaf: 4, max_features: MaxFeatures::All, ..TreeParams::default() };
        let t = fit_tree(&x, &y, &[1.0; 40], (0..40).collect(), p, stream_rng(&[2]));
        assert!(t.depth() <= 3);
        // every leaf keeps at least 4 rows
        let mut leaf_sizes = std::collections::HashMap::new();
        for i in 0..40 {
            *leaf_sizes.entry(t.leaf_index(x.row(i))).or_insert(0) += 1;
        }
        assert!(t.node_count() > 1);
        assert!(leaf_sizes.values().all(|&c| c >= 4), "{leaf_sizes:?}");
    }

    #[test]
    fn max_features_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(100), 10);
        assert_eq!(MaxFeatures::Log2.count(100), 6);
        assert_eq!(MaxFeatures::All.count(7), 7);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
    }
}
