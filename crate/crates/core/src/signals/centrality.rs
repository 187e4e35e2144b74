//! Degree, PageRank, betweenness, eigenvector and closeness centrality.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rayon::prelude::*;

use super::{Category, Directedness, NodeSignal};
use crate::graph::{connected_components, Graph};
use crate::rng::stream_rng;

pub const PAGERANK_ALPHA: f64 = 0.85;
pub const PAGERANK_MAX_ITER: usize = 100;
pub const PAGERANK_TOL: f64 = 1e-8;
pub const BETWEENNESS_MAX_PIVOTS: usize = 2000;
/// Pivot sampling is pinned to the protocol seed so the signal does not vary with evaluation seeds.
pub const BETWEENNESS_PIVOT_SEED: u64 = 42;
pub const EIGENVECTOR_MAX_ITER: usize = 1000;
pub const EIGENVECTOR_TOL: f64 = 1e-6;

/// Incident-edge count (in + out on a directed graph).
pub fn degree_centrality(g: &Graph) -> NodeSignal {
    let values = (0..g.node_count()).map(|v| g.degree(v) as f64).collect();
    NodeSignal::single("degree", "count", Category::Centrality, view_of(g), values)
}

fn view_of(g: &Graph) -> Directedness {
    if g.is_directed() {
        Directedness::Directed
    } else {
        Directedness::Undirected
    }
}

/// Power-iteration PageRank result.
#[derive(Debug, Clone)]
pub struct PageRankScores {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// PageRank with uniform teleportation and dangling mass spread uniformly.
pub fn pagerank_scores(g: &Graph, alpha: f64, max_iter: usize, tol: f64) -> PageRankScores {
    let n = g.node_count();
    let nf = n as f64;
    let out_deg: Vec<f64> = (0..n).map(|v| g.out_neighbors(v).len() as f64).collect();
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&v| out_deg[v] == 0.0).map(|v| x[v]).sum();
        let base = (1.0 - alpha) / nf + alpha * dangling / nf;
        for v in 0..n {
            let inflow: f64 = g.in_neighbors(v).iter().map(|&u| x[u] / out_deg[u]).sum();
            next[v] = base + alpha * inflow;
        }
        let err: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if err < nf * tol {
            converged = true;
            break;
        }
    }
    PageRankScores {
        scores: x,
        iterations,
        converged,
    }
}

/// PageRank on the directed graph with fixed parameters (alpha 0.85, 100 iterations, 1e-8).
pub fn pagerank(g: &Graph) -> NodeSignal {
    let pr = pagerank_scores(g, PAGERANK_ALPHA, PAGERANK_MAX_ITER, PAGERANK_TOL);
    let mut sig = NodeSignal::single("pagerank", "score", Category::Centrality, view_of(g), pr.scores);
    if !pr.converged {
        sig.notes
            .push(format!("pagerank: not converged after {} iterations", pr.iterations));
    }
    sig
}

/// Single-source Brandes dependency accumulation on an undirected graph.
fn brandes_from(g: &Graph, s: usize, acc: &mut [f64], scratch: &mut BrandesScratch) {
    let BrandesScratch {
        sigma,
        dist,
        delta,
        order,
        queue,
    } = scratch;
    for v in order.drain(..) {
        sigma[v] = 0.0;
        dist[v] = usize::MAX;
        delta[v] = 0.0;
    }
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[u] + 1 {
                sigma[w] += sigma[u];
            }
        }
    }
    for &w in order.iter().rev() {
        for &v in g.neighbors(w) {
            if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

struct BrandesScratch {
    sigma: Vec<f64>,
    dist: Vec<usize>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        BrandesScratch {
            sigma: vec![0.0; n],
            dist: vec![usize::MAX; n],
            delta: vec![0.0; n],
            order: (0..n).collect(),
            queue: VecDeque::new(),
        }
    }
}

/// Pivots used by [`betweenness_approx`]: all nodes when `|V| <= 2000`, else a
/// uniform sample without replacement, sorted ascending.
pub fn betweenness_pivots(n: usize, max_pivots: usize, seed: u64) -> Vec<usize> {
    if n <= max_pivots {
        return (0..n).collect();
    }
    let mut rng = stream_rng(&[0x6274_776e, seed]);
    let mut p = sample(&mut rng, n, max_pivots).into_vec();
    p.sort_unstable();
    p
}

/// Unnormalized betweenness from sampled pivots, rescaled by `|V| / pivots`.
/// Exact (pair counts) when every node is a pivot.
pub fn betweenness_scores(g: &Graph, max_pivots: usize, seed: u64) -> Vec<f64> {
    let g = g.undirected_view();
    let n = g.node_count();
    let pivots = betweenness_pivots(n, max_pivots, seed);
    // fixed chunking keeps the floating-point reduction order schedule-independent
    const CHUNK: usize = 32;
    let partials: Vec<Vec<f64>> = pivots
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = BrandesScratch::new(n);
            for &s in chunk {
                brandes_from(&g, s, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in &partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    let scale = n as f64 / pivots.len() as f64 / 2.0;
    total.iter_mut().for_each(|x| *x *= scale);
    total
}

pub fn betweenness_approx(g: &Graph) -> NodeSignal {
    let values = betweenness_scores(g, BETWEENNESS_MAX_PIVOTS, BETWEENNESS_PIVOT_SEED);
    NodeSignal::single(
        "betweenness",
        "score",
        Category::Centrality,
        Directedness::Undirected,
        values,
    )
}

/// Per-component eigenvector centrality result.
#[derive(Debug, Clone)]
pub struct EigenvectorScores {
    pub scores: Vec<f64>,
    /// Components (by label) that hit the iteration cap.
    pub unconverged: Vec<usize>,
}

/// Power iteration on `A + I` per connected component with uniform start; each
/// component's vector is L2-normalized; singleton components score 0.
pub fn eigenvector_scores(g: &Graph, max_iter: usize, tol: f64) -> EigenvectorScores {
    let g = g.undirected_view();
    let n = g.node_count();
    let comps = connected_components(&g);
    let mut scores = vec![0.0; n];
    let mut unconverged = Vec::new();
    let mut local = vec![usize::MAX; n];
    for (c, members) in comps.members().into_iter().enumerate() {
        let m = members.len();
        if m < 2 {
            continue;
        }
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let mut x = vec![1.0 / (m as f64).sqrt(); m];
        let mut y = vec![0.0; m];
        let mut converged = false;
        for _ in 0..max_iter {
            for (i, &v) in members.iter().enumerate() {
                y[i] = x[i] + g.neighbors(v).iter().map(|&w| x[local[w]]).sum::<f64>();
            }
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            y.iter_mut().for_each(|a| *a /= norm);
            let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut y);
            if err < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            unconverged.push(c);
        }
        for (i, &v) in members.iter().enumerate() {
            scores[v] = x[i];
        }
    }
    EigenvectorScores {
        scores,
        unconverged,
    }
}

pub fn eigenvector_centrality(g: &Graph) -> NodeSignal {
    let ev = eigenvector_scores(g, EIGENVECTOR_MAX_ITER, EIGENVECTOR_TOL);
    let mut sig = NodeSignal::single(
        "eigenvector",
        "score",
        Category::Centrality,
        Directedness::Undirected,
        ev.scores,
    );
    if !ev.unconverged.is_empty() {
        sig.notes.push(format!(
            "eigenvector: {} component(s) not converged after {EIGENVECTOR_MAX_ITER} iterations",
            ev.unconverged.len()
        ));
    }
    sig
}

/// BFS hop distances from `s`; unreachable nodes stay `usize::MAX`.
pub(crate) fn bfs_distances(g: &Graph, s: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) {
    dist.iter_mut().for_each(|d| *d = usize::MAX);
    dist[s] = 0;
    queue.clear();
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
}

/// `(m - 1) / sum of distances` within the node's component of size `m`.
pub fn closeness_scores(g: &Graph) -> Vec<f64> {
    let g = g.undirected_view();
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), v| {
                bfs_distances(&g, v, dist, queue);
                let (reached, total) = dist
                    .iter()
                    .filter(|&&d| d != usize::MAX)
                    .fold((0usize, 0usize), |(r, t), &d| (r + 1, t + d));
                if total == 0 {
                    0.0
                } else {
                    (reached - 1) as f64 / total as f64
                }
            },
        )
        .collect()
}

pub fn closeness_centrality(g: &Graph) -> NodeSignal {
    NodeSignal::single(
        "closeness",
        "score",
        Category::Centrality,
        Directedness::Undirected,
        closeness_scores(g),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle() -> Graph {
        Graph::undirected_from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    fn star(k: usize) -> Graph {
        let edges: Vec<_> = (1..=k).map(|i| (0, i)).collect();
        Graph::undirected_from_edges(k + 1, &edges).unwrap()
    }

    #[test]
    fn degree_cases() {
        assert_eq!(degree_centrality(&triangle()).values(), &[2.0, 2.0, 2.0]);
        assert_eq!(degree_centrality(&star(4)).values(), &[4.0, 1.0, 1.0, 1.0, 1.0]);
        let chain = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(degree_centrality(&chain).values(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn pagerank_cycle_is_uniform() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let s = pagerank(&g);
        for &x in s.values() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-12);
        }
    }

    /// Dense Google-matrix power iteration, 200 steps.
    fn dense_pagerank(n: usize, edges: &[(usize, usize)], alpha: f64) -> Vec<f64> {
        let mut out = vec![0usize; n];
        for &(u, _) in edges {
            out[u] += 1;
        }
        let mut m = vec![vec![0.0; n]; n];
        for &(u, v) in edges {
            m[v][u] += 1.0 / out[u] as f64;
        }
        for u in (0..n).filter(|&u| out[u] == 0) {
            for row in m.iter_mut() {
                row[u] = 1.0 / n as f64;
            }
        }
        let mut x = vec![1.0 / n as f64; n];
        for _ in 0..200 {
            x = (0..n)
                .map(|i| (1.0 - alpha) / n as f64 + alpha * (0..n).map(|j| m[i][j] * x[j]).sum::<f64>())
                .collect();
        }
        x
    }

    #[test]
    fn pagerank_two_nodes_matches_dense_oracle() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = pagerank(&g);
        let oracle = dense_pagerank(2, &[(0, 1)], 0.85);
        for (a, b) in s.values().iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(s.values().iter().sum::<f64>(), 1.0, epsilon = 1e-6);
        assert!(s.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn betweenness_path_is_pair_count() {
        let g = Graph::undirected_from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(betweenness_approx(&g).values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn betweenness_cycle_is_uniform() {
        let g = Graph::undirected_from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let s = betweenness_approx(&g);
        for &x in s.values() {
            assert_abs_diff_eq!(x, s.values()[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn pivots_cap_and_determinism() {
        assert_eq!(betweenness_pivots(10, 2000, 42).len(), 10);
        let a = betweenness_pivots(5000, 2000, 42);
        assert_eq!(a.len(), 2000);
        assert_eq!(a, betweenness_pivots(5000, 2000, 42));
    }

    #[test]
    fn eigenvector_cases() {
        let s = eigenvector_centrality(&triangle());
        for &x in s.values() {
            assert_abs_diff_eq!(x, 1.0 / 3f64.sqrt(), epsilon = 1e-6);
        }
        for k in [2usize, 4, 9] {
            let s = eigenvector_scores(&star(k), 100_000, 1e-14).scores;
            assert_abs_diff_eq!(s[0] / s[1], (k as f64).sqrt(), epsilon = 1e-6);
        }
        let two = Graph::undirected_from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
            .unwrap();
        for &x in eigenvector_centrality(&two).values() {
            assert_abs_diff_eq!(x, 1.0 / 3f64.sqrt(), epsilon = 1e-6);
        }
        let isolated = Graph::undirected_from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(eigenvector_centrality(&isolated).values()[2], 0.0);
    }

    #[test]
    fn closeness_path() {
        let g = Graph::undirected_from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        let s = closeness_centrality(&g);
        assert_abs_diff_eq!(s.values()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(s.values()[3], 0.0);
    }
}
