use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sigbench::embed::{generate_walks, WalkConfig};
use sigbench::harness::{generate, SyntheticSpec};
use sigbench::signals::{betweenness_approx, core_number, louvain, pagerank, triangle_count};
use sigbench::Graph;

fn planted(n: usize) -> Graph {
    let spec = SyntheticSpec { n, positive_rate: 0.1, ..Default::default() };
    generate(&spec).unwrap().graph().unwrap()
}

fn centrality(c: &mut Criterion) {
    let mut group = c.benchmark_group("centrality");
    for n in [500, 2000] {
        let g = planted(n);
        group.bench_with_input(BenchmarkId::new("pagerank", n), &g, |b, g| b.iter(|| pagerank(black_box(g))));
        group.bench_with_input(BenchmarkId::new("betweenness", n), &g, |b, g| {
            b.iter(|| betweenness_approx(black_box(g)))
        });
    }
    group.finish();
}

fn cohesion_and_community(c: &mut Criterion) {
    let g = planted(2000);
    c.bench_function("triangles/2000", |b| b.iter(|| triangle_count(black_box(&g))));
    c.bench_function("core_number/2000", |b| b.iter(|| core_number(black_box(&g))));
    let mut group = c.benchmark_group("community");
    group.sample_size(10);
    group.bench_function("louvain/2000", |b| b.iter(|| louvain(black_box(&g.undirected_view()), 42)));
    group.finish();
}

fn walks(c: &mut Criterion) {
    let g = planted(2000).undirected_view();
    let mut group = c.benchmark_group("walks");
    group.sample_size(10);
    for (p, q) in [(1.0, 1.0), (1.0, 0.5)] {
        let cfg = WalkConfig::with_bias(p, q, 42);
        group.bench_function(format!("p={p},q={q}"), |b| b.iter(|| generate_walks(black_box(&g), &cfg)));
    }
    group.finish();
}

criterion_group!(benches, centrality, cohesion_and_community, walks);
criterion_main!(benches);
