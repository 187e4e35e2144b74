//! Second-order biased random walks.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::skipgram::{skipgram_train, SkipGramConfig};
use super::{Embedding, EMBEDDING_DIM};
use crate::graph::Graph;
use crate::rng::{stream_rng, stream_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 20,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn with_bias(p: f64, q: f64, seed: u64) -> Self {
        WalkConfig {
            p,
            q,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) {
        assert!(self.walks_per_node >= 1, "walks_per_node must be >= 1");
        assert!(self.walk_length >= 2, "walk_length must be >= 2");
        assert!(self.p > 0.0 && self.q > 0.0, "p and q must be positive");
    }

    fn unbiased(&self) -> bool {
        self.p == 1.0 && self.q == 1.0
    }
}

/// Token sequences over a vocabulary `0..vocab_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocab_size: usize,
    pub walks: Vec<Vec<u32>>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Rewrites every token through `map` into a new vocabulary.
    pub fn relabel(&self, map: &[u32], vocab_size: usize) -> Corpus {
        Corpus {
            vocab_size,
            walks: self
                .walks
                .iter()
                .map(|w| w.iter().map(|&t| map[t as usize]).collect())
                .collect(),
        }
    }
}

/// One walk from `start`; the stream for (seed, start, index) fully decides it.
pub fn single_walk(g: &Graph, cfg: &WalkConfig, start: usize, index: usize) -> Vec<u32> {
    let mut rng = stream_rng(&[tag("walk"), cfg.seed, start as u64, index as u64]);
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start as u32);
    let first = g.neighbors(start);
    if first.is_empty() {
        return walk;
    }
    let mut prev = start;
    let mut cur = first[rng.random_range(0..first.len())];
    walk.push(cur as u32);
    let inv_p = 1.0 / cfg.p;
    let inv_q = 1.0 / cfg.q;
    let max_w = inv_p.max(1.0).max(inv_q);
    while walk.len() < cfg.walk_length {
        let nbrs = g.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let next = if cfg.unbiased() {
            nbrs[rng.random_range(0..nbrs.len())]
        } else {
            let prev_nbrs = g.neighbors(prev);
            loop {
                let x = nbrs[rng.random_range(0..nbrs.len())];
                let w = if x == prev {
                    inv_p
                } else if prev_nbrs.binary_search(&x).is_ok() {
                    1.0
                } else {
                    inv_q
                };
                if rng.random::<f64>() * max_w < w {
                    break x;
                }
            }
        };
        prev = cur;
        cur = next;
        walk.push(cur as u32);
    }
    walk
}

/// `walks_per_node` walks from every node. Round `r` holds one walk per node in
/// a seeded shuffled order; rounds are concatenated.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig) -> Corpus {
    cfg.validate();
    let g = if g.is_directed() { g.undirected_view() } else { g.clone() };
    let n = g.node_count();
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for r in 0..cfg.walks_per_node {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(&[tag("walk-order"), cfg.seed, r as u64]));
        let round: Vec<Vec<u32>> = order
            .par_iter()
            .map(|&v| single_walk(&g, cfg, v, r))
            .collect();
        walks.extend(round);
    }
    Corpus { vocab_size: n, walks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node2VecVariant {
    DeepWalk,
    Bfs,
    Dfs,
    Balanced,
}

impl Node2VecVariant {
    pub fn bias(self) -> (f64, f64) {
        match self {
            Node2VecVariant::DeepWalk | Node2VecVariant::Balanced => (1.0, 1.0),
            Node2VecVariant::Bfs => (1.0, 4.0),
            Node2VecVariant::Dfs => (1.0, 0.25),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Node2VecVariant::DeepWalk => "deepwalk",
            Node2VecVariant::Bfs => "node2vec_bfs",
            Node2VecVariant::Dfs => "node2vec_dfs",
            Node2VecVariant::Balanced => "node2vec_balanced",
        }
    }
}

/// Walks with the variant's (p, q) followed by skip-gram training. Random
/// streams are keyed by variant name too, so DeepWalk and the balanced variant
/// are independent draws from the same walk distribution.
pub fn node2vec_variant(g: &Graph, variant: Node2VecVariant, seed: u64) -> Embedding {
    let (p, q) = variant.bias();
    let stream = stream_seed(&[seed, tag(variant.name())]);
    let corpus = generate_walks(g, &WalkConfig::with_bias(p, q, stream));
    let cfg = SkipGramConfig {
        dim: EMBEDDING_DIM,
        seed: stream,
        ..SkipGramConfig::default()
    };
    let mut e = skipgram_train(&corpus, &cfg).expect("graph walks are never empty");
    e.generator = variant.name().to_string();
    e.seed = seed;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbiased_triangle_transitions_are_uniform() {
        let g = Graph::undirected_from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let cfg = WalkConfig {
            walks_per_node: 500,
            walk_length: 68,
            seed: 3,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&g, &cfg);
        // from node 0 the next step is 1 or 2
        let (mut steps, mut to_one) = (0u64, 0u64);
        for w in &corpus.walks {
            for pair in w.windows(2) {
                if pair[0] == 0 {
                    steps += 1;
                    to_one += (pair[1] == 1) as u64;
                }
            }
        }
        let total: usize = corpus.walks.iter().map(|w| w.len() - 1).sum();
        assert!(total >= 100_000);
        let mean = steps as f64 * 0.5;
        let sigma = (steps as f64 * 0.25).sqrt();
        assert!((to_one as f64 - mean).abs() <= 3.0 * sigma, "{to_one} of {steps}");
    }

    #[test]
    fn isolated_node_walk_is_just_itself() {
        let g = Graph::undirected_from_edges(3, &[(0, 1)]).unwrap();
        let corpus = generate_walks(&g, &WalkConfig::default());
        let from_two: Vec<_> = corpus.walks.iter().filter(|w| w[0] == 2).collect();
        assert_eq!(from_two.len(), 10);
        assert!(from_two.iter().all(|w| w.as_slice() == [2]));
    }

    #[test]
    fn default_corpus_shape() {
        let g = Graph::undirected_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let corpus = generate_walks(&g, &WalkConfig::default());
        assert_eq!(corpus.walks.len(), 50);
        for v in 0..5u32 {
            assert_eq!(corpus.walks.iter().filter(|w| w[0] == v).count(), 10);
        }
        assert!(corpus.walks.iter().all(|w| w.len() == 20));
    }

    #[test]
    fn walks_follow_edges_and_are_reproducible() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)];
        let g = Graph::undirected_from_edges(6, &edges).unwrap();
        let cfg = WalkConfig::with_bias(0.5, 2.0, 11);
        let a = generate_walks(&g, &cfg);
        assert_eq!(a, generate_walks(&g, &cfg));
        for w in &a.walks {
            for pair in w.windows(2) {
                assert!(g.neighbors(pair[0] as usize).contains(&(pair[1] as usize)));
            }
        }
    }

    #[test]
    fn balanced_matches_deepwalk_distribution() {
        assert_eq!(Node2VecVariant::Balanced.bias(), Node2VecVariant::DeepWalk.bias());
        let g = Graph::undirected_from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let a = generate_walks(&g, &WalkConfig::with_bias(1.0, 1.0, 5));
        let b = generate_walks(&g, &WalkConfig { seed: 5, ..WalkConfig::default() });
        assert_eq!(a, b);
        let dw = node2vec_variant(&g, Node2VecVariant::DeepWalk, 5);
        let bal = node2vec_variant(&g, Node2VecVariant::Balanced, 5);
        assert_ne!(dw.as_slice(), bal.as_slice());
        assert_eq!((dw.seed, bal.seed), (5, 5));
    }
}
