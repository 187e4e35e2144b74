//! Layered degree-distribution similarity graph embedded with walks.

use rayon::prelude::*;

use super::skipgram::{skipgram_train, SkipGramConfig};
use super::walks::{generate_walks, WalkConfig};
use super::Embedding;
use crate::graph::Graph;

pub const LAYER_WEIGHTS: [f64; 3] = [1.0, 1.0, 1.0];
pub const NEIGHBORS: usize = 10;
/// Above this size k-NN candidates come from a window over nodes sorted by profile.
pub const BRUTE_FORCE_LIMIT: usize = 5000;
const WINDOW: usize = 100;

/// Weight of layer `k`; layers past the table contribute nothing.
pub fn layer_weight(k: usize) -> f64 {
    LAYER_WEIGHTS.get(k).copied().unwrap_or(0.0)
}

/// Per node and layer, (mean, variance) of the degrees at exact hop distance `k`.
pub fn ring_profiles(g: &Graph) -> Vec<[(f64, f64); 3]> {
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![usize::MAX; n],
            |dist, u| {
                let mut rings: [Vec<usize>; 3] = [vec![u], Vec::new(), Vec::new()];
                dist[u] = 0;
                for k in 1..3 {
                    let (before, after) = rings.split_at_mut(k);
                    for &x in &before[k - 1] {
                        for &y in g.neighbors(x) {
                            if dist[y] == usize::MAX {
                                dist[y] = k;
                                after[0].push(y);
                            }
                        }
                    }
                }
                let mut out = [(0.0, 0.0); 3];
                for (k, ring) in rings.iter().enumerate() {
                    if !ring.is_empty() {
                        let degs: Vec<f64> = ring.iter().map(|&x| g.neighbors(x).len() as f64).collect();
                        let mean = degs.iter().sum::<f64>() / degs.len() as f64;
                        let var = degs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / degs.len() as f64;
                        out[k] = (mean, var);
                    }
                    for &x in ring {
                        dist[x] = usize::MAX;
                    }
                }
                out
            },
        )
        .collect()
}

pub fn structural_distance(a: &[(f64, f64); 3], b: &[(f64, f64); 3]) -> f64 {
    (0..3)
        .map(|k| layer_weight(k) * ((a[k].0 - b[k].0).abs() + (a[k].1 - b[k].1).abs()))
        .sum()
}

/// Symmetrized unweighted k-nearest-neighbor graph under [`structural_distance`].
pub fn similarity_graph(profiles: &[[(f64, f64); 3]], k: usize) -> Graph {
    let n = profiles.len();
    let candidates: Box<dyn Fn(usize) -> Vec<usize> + Sync> = if n <= BRUTE_FORCE_LIMIT {
        Box::new(move |_| (0..n).collect())
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&profiles[a], &profiles[b]);
            pa[0].0.total_cmp(&pb[0].0).then(pa[1].0.total_cmp(&pb[1].0)).then(a.cmp(&b))
        });
        let mut pos = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        Box::new(move |u| {
            let p = pos[u];
            order[p.saturating_sub(WINDOW)..(p + WINDOW + 1).min(n)].to_vec()
        })
    };
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut c: Vec<(f64, usize)> = candidates(u)
                .into_iter()
                .filter(|&v| v != u)
                .map(|v| (structural_distance(&profiles[u], &profiles[v]), v))
                .collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            c.into_iter().take(k).map(|(_, v)| v).collect()
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(u, l)| l.iter().map(move |&v| (u.min(v), u.max(v))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph::undirected_from_edges(n, &edges).expect("indices in range")
}

pub fn struct_layer_embedding(g: &Graph, seed: u64) -> Embedding {
    let g = if g.is_directed() { g.undirected_view() } else { g.clone() };
    let sim = similarity_graph(&ring_profiles(&g), NEIGHBORS);
    let corpus = generate_walks(&sim, &WalkConfig { seed, ..WalkConfig::default() });
    let cfg = SkipGramConfig { seed, ..SkipGramConfig::default() };
    let mut e = skipgram_train(&corpus, &cfg).expect("graph walks are never empty");
    e.generator = "struct_layer".into();
    e
}
