//! Name-to-generator dispatch for every signal, with a per-graph cache.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::assembly::SignalInput;
use crate::embed::{
    graphwave, load_embedding_file, node2vec_variant, role2vec, spectral_embedding, struct_layer_embedding,
    Embedding, Node2VecVariant, WaveletConfig, EMBEDDING_DIM,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeIds};
use crate::signals::{
    average_neighbor_clustering, betweenness_approx, closeness_centrality, clustering_coefficient,
    community_features, core_number, degree_centrality, eigenvector_centrality, infomap, leiden, louvain, pagerank,
    triangle_count, NodeSignal, SignalKind,
};

#[derive(Debug, Clone)]
pub enum Computed {
    Indicator(NodeSignal),
    Embedding(Embedding),
}

impl Computed {
    pub fn as_input(&self) -> SignalInput<'_> {
        match self {
            Computed::Indicator(s) => SignalInput::Indicator(s),
            Computed::Embedding(e) => SignalInput::Embedding(e),
        }
    }

    /// Indicators as `node_id,<columns>` CSV; embeddings in the shared
    /// `node_id,dim=<d>` format.
    pub fn write(&self, ids: &NodeIds, path: &Path) -> Result<()> {
        let s = match self {
            Computed::Embedding(e) => return e.write(ids, path),
            Computed::Indicator(s) => s,
        };
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
        let names: Vec<&str> = s.columns.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "node_id,{}", names.join(",")).map_err(io)?;
        for v in 0..ids.len() {
            write!(w, "{}", ids.external(v)).map_err(io)?;
            for (_, col) in &s.columns {
                write!(w, ",{:?}", col[v]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn width(&self) -> usize {
        match self {
            Computed::Indicator(s) => s.columns.len(),
            Computed::Embedding(e) => e.dim(),
        }
    }
}

/// Computes one signal on `g`. External signals are read from `external`.
pub fn compute_signal(
    kind: SignalKind,
    g: &Graph,
    seed: u64,
    external: &BTreeMap<String, PathBuf>,
) -> Result<Computed> {
    use SignalKind::*;
    let out = match kind {
        Degree => Computed::Indicator(degree_centrality(g)),
        PageRank => Computed::Indicator(pagerank(g)),
        Betweenness => Computed::Indicator(betweenness_approx(g)),
        Eigenvector => Computed::Indicator(eigenvector_centrality(g)),
        Closeness => Computed::Indicator(closeness_centrality(g)),
        Clustering => Computed::Indicator(clustering_coefficient(g)),
        CoreNumber => Computed::Indicator(core_number(g)),
        Triangles => Computed::Indicator(triangle_count(g)),
        AvgNeighborClustering => Computed::Indicator(average_neighbor_clustering(g)),
        Louvain => Computed::Indicator(community_features("louvain", &louvain(g, seed), g)),
        Leiden => Computed::Indicator(community_features("leiden", &leiden(g, seed), g)),
        Infomap => Computed::Indicator(community_features("infomap", &infomap(g, seed), g)),
        DeepWalk => Computed::Embedding(node2vec_variant(g, Node2VecVariant::DeepWalk, seed)),
        Node2VecBfs => Computed::Embedding(node2vec_variant(g, Node2VecVariant::Bfs, seed)),
        Node2VecDfs => Computed::Embedding(node2vec_variant(g, Node2VecVariant::Dfs, seed)),
        Node2VecBalanced => Computed::Embedding(node2vec_variant(g, Node2VecVariant::Balanced, seed)),
        Spectral => Computed::Embedding(spectral_embedding(g, EMBEDDING_DIM)),
        StructLayer => Computed::Embedding(struct_layer_embedding(g, seed)),
        GraphWave => Computed::Embedding(graphwave(g, &WaveletConfig::default())),
        Role2Vec => Computed::Embedding(role2vec(g, seed)),
        Gcn | Gat | Gcl => {
            let path = external
                .get(kind.name())
                .ok_or_else(|| Error::Config(format!("no embedding file configured for `{kind}`")))?;
            Computed::Embedding(load_embedding_file(path, g.ids(), kind.name())?)
        }
    };
    match &out {
        Computed::Indicator(s) => s.validate(g.node_count())?,
        Computed::Embedding(e) if !e.is_finite() => return Err(Error::NonFinite(kind.name().into())),
        Computed::Embedding(e) if e.rows() != g.node_count() => {
            return Err(Error::DimensionMismatch { expected: g.node_count(), found: e.rows() })
        }
        Computed::Embedding(_) => {}
    }
    Ok(out)
}

/// Signals of one graph variant, computed at most once each.
pub struct SignalCache<'g> {
    graph: &'g Graph,
    seed: u64,
    external: BTreeMap<String, PathBuf>,
    done: Mutex<BTreeMap<SignalKind, std::result::Result<Computed, String>>>,
}

impl<'g> SignalCache<'g> {
    pub fn new(graph: &'g Graph, seed: u64, external: BTreeMap<String, PathBuf>) -> Self {
        SignalCache { graph, seed, external, done: Mutex::new(BTreeMap::new()) }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    /// Fills the cache for `kinds` in parallel. Failures are kept per signal.
    pub fn compute_all(&self, kinds: &BTreeSet<SignalKind>) {
        let todo: Vec<SignalKind> = {
            let done = self.done.lock().unwrap();
            kinds.iter().copied().filter(|k| !done.contains_key(k)).collect()
        };
        let results: Vec<_> = todo
            .par_iter()
            .map(|&k| {
                log::info!("computing signal {k} on {} nodes", self.graph.node_count());
                (k, compute_signal(k, self.graph, self.seed, &self.external).map_err(|e| e.to_string()))
            })
            .collect();
        self.done.lock().unwrap().extend(results);
    }

    pub fn get(&self, kind: SignalKind) -> Result<Computed> {
        if !self.done.lock().unwrap().contains_key(&kind) {
            self.compute_all(&BTreeSet::from([kind]));
        }
        let done = self.done.lock().unwrap();
        match &done[&kind] {
            Ok(c) => Ok(c.clone()),
            Err(e) => Err(Error::invalid(format!("signal `{kind}` failed: {e}"))),
        }
    }
}
