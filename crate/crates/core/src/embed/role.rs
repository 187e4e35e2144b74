//! Role-token walks: nodes sharing a (degree bin, triangle bin) role share a vector.

use std::collections::BTreeMap;

use super::skipgram::{skipgram_train, SkipGramConfig};
use super::walks::{generate_walks, WalkConfig};
use super::Embedding;
use crate::graph::Graph;
use crate::signals::cohesion::triangle_counts;

fn log_bin(x: u64) -> u32 {
    (x + 1).ilog2()
}

/// `(floor(log2(1 + degree)), floor(log2(1 + triangles)))` per node.
pub fn roles(g: &Graph) -> Vec<(u32, u32)> {
    let tri = triangle_counts(g);
    (0..g.node_count())
        .map(|v| (log_bin(g.neighbors(v).len() as u64), log_bin(tri[v])))
        .collect()
}

pub fn role2vec(g: &Graph, seed: u64) -> Embedding {
    let g = if g.is_directed() { g.undirected_view() } else { g.clone() };
    let roles = roles(&g);
    let mut ids = BTreeMap::new();
    for r in &roles {
        let next = ids.len() as u32;
        ids.entry(*r).or_insert(next);
    }
    let token: Vec<u32> = roles.iter().map(|r| ids[r]).collect();
    let corpus = generate_walks(&g, &WalkConfig { seed, ..WalkConfig::default() }).relabel(&token, ids.len());
    let cfg = SkipGramConfig { seed, ..SkipGramConfig::default() };
    let tokens = skipgram_train(&corpus, &cfg).expect("graph walks are never empty");
    let mut e = Embedding::zeros("role2vec", seed, g.node_count(), tokens.dim());
    for (v, &t) in token.iter().enumerate() {
        e.row_mut(v).copy_from_slice(tokens.row(t as usize));
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_leaves_share_a_role() {
        let edges: Vec<_> = (1..=5).map(|l| (0, l)).collect();
        let g = Graph::undirected_from_edges(6, &edges).unwrap();
        let e = role2vec(&g, 1);
        assert_eq!(e.dim(), 64);
        assert!((2..=5).all(|l| e.row(l) == e.row(1)));
        assert_ne!(e.row(0), e.row(1));
    }

    #[test]
    fn distant_cliques_get_identical_members() {
        let mut edges = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                edges.push((a, b));
                edges.push((5 + a, 5 + b));
            }
        }
        let g = Graph::undirected_from_edges(10, &edges).unwrap();
        let e = role2vec(&g, 3);
        assert_eq!(e.row(0), e.row(7));
        assert_eq!(roles(&g)[0], (2, 2));
    }
}
