use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigbench::embed::{
    graphwave, mean_cosine, node2vec_variant, spectral_embedding, Node2VecVariant, WaveletConfig,
};
use sigbench::Graph;

fn barbell(k: usize, path: usize) -> (Graph, Vec<usize>, Vec<usize>) {
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

fn cosine_gap(g: &Graph, left: &[usize], right: &[usize], variant: Node2VecVariant, seed: u64) -> f64 {
    let e = node2vec_variant(g, variant, seed);
    assert_eq!(e.dim(), 64);
    let intra = mean_cosine(
        &e,
        left.iter().chain(right).flat_map(|&a| {
            let side = if left.contains(&a) { left } else { right };
            side.iter().filter(move |&&b| b > a).map(move |&b| (a, b))
        }),
    );
    let inter = mean_cosine(&e, left.iter().flat_map(|&a| right.iter().map(move |&b| (a, b))));
    intra - inter
}

#[test]
fn breadth_bias_tightens_clique_proximity() {
    let (g, left, right) = barbell(8, 2);
    // averaged over seeds so the paired comparison is not decided by one draw
    let (mut bfs, mut dfs) = (0.0, 0.0);
    for seed in 1..=3 {
        bfs += cosine_gap(&g, &left, &right, Node2VecVariant::Bfs, seed);
        dfs += cosine_gap(&g, &left, &right, Node2VecVariant::Dfs, seed);
    }
    assert!(bfs >= dfs, "bfs gap {bfs} dfs gap {dfs}");
    assert!(cosine_gap(&g, &left, &right, Node2VecVariant::Balanced, 1) > 0.0);
}

fn random_connected(n: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    Graph::from_edges(n, &edges).unwrap().undirected_view()
}

#[test]
fn sparse_spectral_path_matches_dense_oracle() {
    let n = 1100;
    let g = random_connected(n, 2 * n, 9);
    let dim = 6;
    let e = spectral_embedding(&g, dim);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in g.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    let eig = SymmetricEigen::new(l);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    for j in 0..dim {
        let col = eig.eigenvectors.column(order[j + 1]);
        let overlap: f64 = (0..n).map(|v| col[v] * e.row(v)[j]).sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-6, "column {j}: overlap {overlap}");
    }
}

fn small_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>)> {
    (4usize..16).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n), 1..40),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graphwave_is_relabeling_invariant((n, edges, perm) in small_graph()) {
        let cfg = WaveletConfig::default();
        let g = Graph::from_edges(n, &edges).unwrap().undirected_view();
        let moved: Vec<_> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let h = Graph::from_edges(n, &moved).unwrap().undirected_view();
        let (eg, eh) = (graphwave(&g, &cfg), graphwave(&h, &cfg));
        for v in 0..n {
            for (a, b) in eg.row(v).iter().zip(eh.row(perm[v])) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn spectral_entries_are_finite_and_padded((n, edges, _p) in small_graph()) {
        let g = Graph::from_edges(n, &edges).unwrap().undirected_view();
        let e = spectral_embedding(&g, 64);
        prop_assert!(e.is_finite());
        prop_assert!((n..64).all(|j| (0..n).all(|v| e.row(v)[j] == 0.0)));
    }
}
