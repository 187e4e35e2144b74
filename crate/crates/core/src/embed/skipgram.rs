//! Skip-gram with negative sampling.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::walks::Corpus;
use super::Embedding;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: super::EMBEDDING_DIM,
            window: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

const MIN_LR_FRACTION: f64 = 1e-4;

struct Model {
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl Model {
    fn new(vocab: usize, dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(&[tag("skipgram-init"), seed]);
        let input = (0..vocab * dim)
            .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
            .collect();
        Model {
            dim,
            input,
            output: vec![0.0; vocab * dim],
        }
    }

    fn dot(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.input[a * self.dim..][..self.dim], &self.output[b * self.dim..][..self.dim]);
        x.iter().zip(y).map(|(p, q)| p * q).sum()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    // stable for large |x|
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn noise_distribution(corpus: &Corpus) -> Result<WeightedAliasIndex<f64>> {
    let mut counts = vec![0.0f64; corpus.vocab_size];
    for w in &corpus.walks {
        for &t in w {
            counts[t as usize] += 1.0;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    WeightedAliasIndex::new(weights).map_err(|e| Error::invalid(format!("noise distribution: {e}")))
}

fn check(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<()> {
    if corpus.token_count() == 0 || corpus.vocab_size == 0 {
        return Err(Error::invalid("empty corpus"));
    }
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::invalid("dim and window must be positive"));
    }
    Ok(())
}

/// Result of training: the input vectors plus the summed loss of every epoch.
#[derive(Debug, Clone)]
pub struct Trained {
    pub embedding: Embedding,
    pub epoch_losses: Vec<f64>,
}

/// Single-threaded SGD over the corpus. Each center draws a reduced window
/// uniformly from `1..=window`; the learning rate decays linearly to near zero.
pub fn skipgram_train(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<Embedding> {
    skipgram_sgd(corpus, cfg).map(|t| t.embedding)
}

pub fn skipgram_sgd(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<Trained> {
    check(corpus, cfg)?;
    let noise = noise_distribution(corpus)?;
    let dim = cfg.dim;
    let mut m = Model::new(corpus.vocab_size, dim, cfg.seed);
    let mut rng = stream_rng(&[tag("skipgram-sgd"), cfg.seed]);
    let total = (corpus.token_count() * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut grad = vec![0.0; dim];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss = 0.0;
        for walk in &corpus.walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = cfg.learning_rate * (1.0 - processed as f64 / total).max(MIN_LR_FRACTION);
                processed += 1;
                let reach = cfg.window - rng.random_range(0..cfg.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(walk.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let ctx = walk[j] as usize;
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (center as usize, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let score = m.dot(ctx, target);
                        loss -= if label == 1.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
                        let g = (label - sigmoid(score)) * lr;
                        let (inp, out) = (ctx * dim, target * dim);
                        for d in 0..dim {
                            grad[d] += g * m.output[out + d];
                            m.output[out + d] += g * m.input[inp + d];
                        }
                    }
                    let inp = ctx * dim;
                    for d in 0..dim {
                        m.input[inp + d] += grad[d];
                    }
                }
            }
        }
        epoch_losses.push(loss);
    }
    Ok(Trained {
        embedding: Embedding::new("skipgram", cfg.seed, dim, m.input),
        epoch_losses,
    })
}

/// Exact-gradient mode: the (center, context, negatives) triples are drawn once
/// with the full window, then every epoch takes one full-batch gradient step on
/// their mean loss. The reported loss is measured before each step.
pub fn skipgram_full_batch(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<Trained> {
    check(corpus, cfg)?;
    let noise = noise_distribution(corpus)?;
    let dim = cfg.dim;
    let mut m = Model::new(corpus.vocab_size, dim, cfg.seed);
    let mut rng = stream_rng(&[tag("skipgram-full"), cfg.seed]);
    let mut terms: Vec<(usize, usize, f64)> = Vec::new();
    for walk in &corpus.walks {
        for i in 0..walk.len() {
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window).min(walk.len() - 1);
            for j in (lo..=hi).filter(|&j| j != i) {
                let ctx = walk[j] as usize;
                terms.push((ctx, walk[i] as usize, 1.0));
                for _ in 0..cfg.negatives {
                    terms.push((ctx, noise.sample(&mut rng), 0.0));
                }
            }
        }
    }
    let scale = 1.0 / terms.len() as f64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut g_in = vec![0.0; m.input.len()];
        let mut g_out = vec![0.0; m.output.len()];
        let mut loss = 0.0;
        for &(ctx, target, label) in &terms {
            let score = m.dot(ctx, target);
            loss -= if label == 1.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
            let g = (label - sigmoid(score)) * scale;
            for d in 0..dim {
                g_in[ctx * dim + d] += g * m.output[target * dim + d];
                g_out[target * dim + d] += g * m.input[ctx * dim + d];
            }
        }
        epoch_losses.push(loss * scale);
        for (w, g) in m.input.iter_mut().zip(&g_in) {
            *w += cfg.learning_rate * g;
        }
        for (w, g) in m.output.iter_mut().zip(&g_out) {
            *w += cfg.learning_rate * g;
        }
    }
    Ok(Trained {
        embedding: Embedding::new("skipgram", cfg.seed, dim, m.input),
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::walks::{generate_walks, WalkConfig};
    use crate::embed::mean_cosine;
    use crate::graph::Graph;

    pub(crate) fn barbell(k: usize, path: usize) -> (Graph, Vec<usize>, Vec<usize>) {
        let mut edges = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                edges.push((a, b));
                edges.push((k + path + a, k + path + b));
            }
        }
        let mut prev = k - 1;
        for p in 0..path {
            edges.push((prev, k + p));
            prev = k + p;
        }
        edges.push((prev, k + path));
        let g = Graph::undirected_from_edges(2 * k + path, &edges).unwrap();
        (g, (0..k).collect(), (k + path..2 * k + path).collect())
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let c = Corpus { vocab_size: 3, walks: vec![] };
        assert!(skipgram_train(&c, &SkipGramConfig::default()).is_err());
    }

    #[test]
    fn barbell_cliques_separate() {
        let (g, left, right) = barbell(8, 3);
        let corpus = generate_walks(&g, &WalkConfig { seed: 1, ..WalkConfig::default() });
        let cfg = SkipGramConfig { seed: 1, ..SkipGramConfig::default() };
        let e = skipgram_train(&corpus, &cfg).unwrap();
        assert_eq!(e.dim(), 64);
        let intra = mean_cosine(
            &e,
            left.iter().flat_map(|&a| left.iter().filter(move |&&b| b > a).map(move |&b| (a, b))),
        );
        let inter = mean_cosine(&e, left.iter().flat_map(|&a| right.iter().map(move |&b| (a, b))));
        assert!(intra > inter, "intra {intra} inter {inter}");
        assert_eq!(e, skipgram_train(&corpus, &cfg).unwrap());
    }

    #[test]
    fn full_batch_loss_decreases_monotonically() {
        let (g, _, _) = barbell(4, 1);
        let corpus = generate_walks(
            &g,
            &WalkConfig { walks_per_node: 2, walk_length: 6, seed: 2, ..WalkConfig::default() },
        );
        let cfg = SkipGramConfig { dim: 8, window: 2, epochs: 30, learning_rate: 0.5, ..SkipGramConfig::default() };
        let t = skipgram_full_batch(&corpus, &cfg).unwrap();
        for pair in t.epoch_losses.windows(2) {
            assert!(pair[1] < pair[0], "{:?}", t.epoch_losses);
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!(log_sigmoid(800.0) == 0.0);
    }
}
