//! Triangles, clustering, k-core numbers.

use rayon::prelude::*;

use super::{Category, Directedness, NodeSignal};
use crate::graph::Graph;

/// Exact per-node triangle counts on the simple undirected view.
pub fn triangle_counts(g: &Graph) -> Vec<u64> {
    let g = g.undirected_view();
    let n = g.node_count();
    // orient each edge from lower to higher (degree, index) rank and intersect
    let rank = |v: usize| (g.neighbors(v).len(), v);
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut f: Vec<usize> = g
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&w| rank(w) > rank(u))
                .collect();
            f.sort_unstable();
            f
        })
        .collect();
    let per_node: Vec<Vec<(usize, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut found = Vec::new();
            for &v in &forward[u] {
                let (a, b) = (&forward[u], &forward[v]);
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            found.push((u, v, a[i]));
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
            found
        })
        .collect();
    let mut counts = vec![0u64; n];
    for (u, v, w) in per_node.into_iter().flatten() {
        counts[u] += 1;
        counts[v] += 1;
        counts[w] += 1;
    }
    counts
}

pub fn triangle_count(g: &Graph) -> NodeSignal {
    let values = triangle_counts(g).into_iter().map(|c| c as f64).collect();
    NodeSignal::single("triangles", "count", Category::Cohesion, Directedness::Undirected, values)
}

/// `triangles(v) / C(deg(v), 2)`, zero for degree below two.
pub fn clustering_scores(g: &Graph) -> Vec<f64> {
    let u = g.undirected_view();
    let tri = triangle_counts(&u);
    (0..u.node_count())
        .map(|v| {
            let d = u.neighbors(v).len() as f64;
            if d < 2.0 {
                0.0
            } else {
                tri[v] as f64 / (d * (d - 1.0) / 2.0)
            }
        })
        .collect()
}

pub fn clustering_coefficient(g: &Graph) -> NodeSignal {
    NodeSignal::single(
        "clustering",
        "coefficient",
        Category::Cohesion,
        Directedness::Undirected,
        clustering_scores(g),
    )
}

/// Bucket-based minimum-degree peeling (Batagelj–Zaversnik).
pub fn core_numbers(g: &Graph) -> Vec<usize> {
    let g = g.undirected_view();
    let n = g.node_count();
    let mut deg: Vec<usize> = (0..n).map(|v| g.neighbors(v).len()).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for &u in g.neighbors(v) {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    deg
}

pub fn core_number(g: &Graph) -> NodeSignal {
    let values = core_numbers(g).into_iter().map(|c| c as f64).collect();
    NodeSignal::single("core_number", "k", Category::Cohesion, Directedness::Undirected, values)
}

/// Mean clustering coefficient over each node's neighbors; isolated nodes get 0.
pub fn average_neighbor_clustering_from(g: &Graph, clustering: &[f64]) -> Vec<f64> {
    let g = g.undirected_view();
    (0..g.node_count())
        .map(|v| {
            let nb = g.neighbors(v);
            if nb.is_empty() {
                0.0
            } else {
                nb.iter().map(|&w| clustering[w]).sum::<f64>() / nb.len() as f64
            }
        })
        .collect()
}

pub fn average_neighbor_clustering(g: &Graph) -> NodeSignal {
    let cc = clustering_scores(g);
    NodeSignal::single(
        "avg_neighbor_clustering",
        "mean",
        Category::Cohesion,
        Directedness::Undirected,
        average_neighbor_clustering_from(g, &cc),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j));
            }
        }
        e
    }

    fn star(k: usize) -> Graph {
        let edges: Vec<_> = (1..=k).map(|i| (0, i)).collect();
        Graph::undirected_from_edges(k + 1, &edges).unwrap()
    }

    #[test]
    fn k4_cases() {
        let g = Graph::undirected_from_edges(4, &complete(4)).unwrap();
        assert_eq!(triangle_counts(&g), vec![3, 3, 3, 3]);
        assert_eq!(core_numbers(&g), vec![3, 3, 3, 3]);
        assert_eq!(clustering_scores(&g), vec![1.0; 4]);
    }

    #[test]
    fn k4_minus_edge_clustering() {
        let mut e = complete(4);
        e.retain(|&p| p != (2, 3));
        let g = Graph::undirected_from_edges(4, &e).unwrap();
        let cc = clustering_scores(&g);
        // nodes 0 and 1 have degree 3 and two of three neighbor pairs connected
        assert!((cc[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((cc[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn star_cases() {
        let g = star(4);
        assert_eq!(core_numbers(&g), vec![1; 5]);
        let cc = clustering_scores(&g);
        assert_eq!(cc[0], 0.0);
        let avg = average_neighbor_clustering(&g);
        assert_eq!(avg.values()[1], 0.0);
    }

    #[test]
    fn tree_has_no_triangles() {
        let g = Graph::undirected_from_edges(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        assert!(triangle_counts(&g).iter().all(|&t| t == 0));
    }

    #[test]
    fn k4_with_pendant_cores() {
        let mut e = complete(4);
        e.push((3, 4));
        let g = Graph::undirected_from_edges(5, &e).unwrap();
        assert_eq!(core_numbers(&g), vec![3, 3, 3, 3, 1]);
    }

    #[test]
    fn triangle_average_clustering() {
        let g = Graph::undirected_from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(average_neighbor_clustering(&g).values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn isolated_node_core_zero() {
        let g = Graph::undirected_from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(core_numbers(&g), vec![1, 1, 0]);
    }
}
