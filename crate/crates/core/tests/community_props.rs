use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigbench::signals::community::communities_connected;
use sigbench::signals::{infomap, leiden, louvain, map_equation, modularity};
use sigbench::Graph;

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                e.push((i, j));
            }
        }
    }
    Graph::undirected_from_edges(n, &e).unwrap()
}

#[test]
fn leiden_at_least_louvain_on_random_graphs() {
    for s in 0..20 {
        let g = random_graph(50, 0.08, 100 + s);
        let lv = louvain(&g, s);
        let ld = leiden(&g, s);
        assert!(
            ld.quality >= lv.quality - 1e-9,
            "graph {s}: leiden {} < louvain {}",
            ld.quality,
            lv.quality
        );
        assert!(communities_connected(&g, &ld.assignment));
        let singles: Vec<usize> = (0..50).collect();
        assert!(lv.quality >= modularity(&g, &singles));
    }
}

#[test]
fn community_detection_is_deterministic() {
    let g = random_graph(60, 0.1, 9);
    assert_eq!(louvain(&g, 4), louvain(&g, 4));
    assert_eq!(leiden(&g, 4), leiden(&g, 4));
    assert_eq!(infomap(&g, 4), infomap(&g, 4));
}

#[test]
fn infomap_never_worse_than_singletons_on_random_digraphs() {
    for s in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = 40;
        let e: Vec<_> = (0..120)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        let g = Graph::from_edges(n, &e).unwrap();
        let p = infomap(&g, s);
        let singles: Vec<usize> = (0..n).collect();
        assert!(p.quality <= map_equation(&g, &singles) + 1e-9);
    }
}
