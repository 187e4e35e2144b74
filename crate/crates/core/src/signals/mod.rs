//! Centrality, cohesion and community indicators.
//!
//! Every indicator is a [`NodeSignal`]: one or more node-aligned columns named
//! `<signal>.<component>` plus the taxonomy category it belongs to.

pub mod centrality;
pub mod cohesion;
pub mod community;
pub mod infomap;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use centrality::{
    betweenness_approx, closeness_centrality, degree_centrality, eigenvector_centrality, pagerank,
};
pub use cohesion::{average_neighbor_clustering, clustering_coefficient, core_number, triangle_count};
pub use community::{community_features, leiden, louvain, modularity, CommunityPartition};
pub use infomap::{infomap, map_equation};

/// Taxonomy family of a graph-derived signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Centrality,
    Cohesion,
    Community,
    Proximity,
    Spectral,
    Structural,
    Gnn,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Centrality,
        Category::Cohesion,
        Category::Community,
        Category::Proximity,
        Category::Spectral,
        Category::Structural,
        Category::Gnn,
    ];

    pub fn is_embedding(self) -> bool {
        matches!(
            self,
            Category::Proximity | Category::Spectral | Category::Structural | Category::Gnn
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Centrality => "centrality",
            Category::Cohesion => "cohesion",
            Category::Community => "community",
            Category::Proximity => "proximity",
            Category::Spectral => "spectral",
            Category::Structural => "structural",
            Category::Gnn => "gnn",
        }
    }

    /// Signals of this category, in table order.
    pub fn members(self) -> impl Iterator<Item = SignalKind> {
        SignalKind::ALL.into_iter().filter(move |s| s.category() == self)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown category `{s}`")))
    }
}

/// Individual signals in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum SignalKind {
    Degree,
    PageRank,
    Betweenness,
    Eigenvector,
    Closeness,
    Clustering,
    CoreNumber,
    Triangles,
    AvgNeighborClustering,
    Louvain,
    Leiden,
    Infomap,
    DeepWalk,
    Node2VecBfs,
    Node2VecDfs,
    Node2VecBalanced,
    Spectral,
    StructLayer,
    GraphWave,
    Role2Vec,
    Gcn,
    Gat,
    Gcl,
}

impl SignalKind {
    pub const ALL: [SignalKind; 23] = [
        SignalKind::Degree,
        SignalKind::PageRank,
        SignalKind::Betweenness,
        SignalKind::Eigenvector,
        SignalKind::Closeness,
        SignalKind::Clustering,
        SignalKind::CoreNumber,
        SignalKind::Triangles,
        SignalKind::AvgNeighborClustering,
        SignalKind::Louvain,
        SignalKind::Leiden,
        SignalKind::Infomap,
        SignalKind::DeepWalk,
        SignalKind::Node2VecBfs,
        SignalKind::Node2VecDfs,
        SignalKind::Node2VecBalanced,
        SignalKind::Spectral,
        SignalKind::StructLayer,
        SignalKind::GraphWave,
        SignalKind::Role2Vec,
        SignalKind::Gcn,
        SignalKind::Gat,
        SignalKind::Gcl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Degree => "degree",
            SignalKind::PageRank => "pagerank",
            SignalKind::Betweenness => "betweenness",
            SignalKind::Eigenvector => "eigenvector",
            SignalKind::Closeness => "closeness",
            SignalKind::Clustering => "clustering",
            SignalKind::CoreNumber => "core_number",
            SignalKind::Triangles => "triangles",
            SignalKind::AvgNeighborClustering => "avg_neighbor_clustering",
            SignalKind::Louvain => "louvain",
            SignalKind::Leiden => "leiden",
            SignalKind::Infomap => "infomap",
            SignalKind::DeepWalk => "deepwalk",
            SignalKind::Node2VecBfs => "node2vec_bfs",
            SignalKind::Node2VecDfs => "node2vec_dfs",
            SignalKind::Node2VecBalanced => "node2vec_balanced",
            SignalKind::Spectral => "spectral",
            SignalKind::StructLayer => "struct_layer",
            SignalKind::GraphWave => "graphwave",
            SignalKind::Role2Vec => "role2vec",
            SignalKind::Gcn => "gcn",
            SignalKind::Gat => "gat",
            SignalKind::Gcl => "gcl",
        }
    }

    pub fn category(self) -> Category {
        use SignalKind::*;
        match self {
            Degree | PageRank | Betweenness | Eigenvector | Closeness => Category::Centrality,
            Clustering | CoreNumber | Triangles | AvgNeighborClustering => Category::Cohesion,
            Louvain | Leiden | Infomap => Category::Community,
            DeepWalk | Node2VecBfs | Node2VecDfs | Node2VecBalanced => Category::Proximity,
            Spectral => Category::Spectral,
            StructLayer | GraphWave | Role2Vec => Category::Structural,
            Gcn | Gat | Gcl => Category::Gnn,
        }
    }

    /// Embedding-valued signals (eligible for PCA reduction).
    pub fn is_embedding(self) -> bool {
        self.category().is_embedding()
    }

    /// Signals supplied as external embedding files rather than computed here.
    pub fn is_external(self) -> bool {
        self.category() == Category::Gnn
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<SignalKind> for &'static str {
    fn from(k: SignalKind) -> Self {
        k.name()
    }
}

impl TryFrom<String> for SignalKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown signal `{s}`")))
    }
}

/// Which view of the graph a signal was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directedness {
    Directed,
    Undirected,
}

/// Node-aligned columns produced by one signal generator.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignal {
    pub name: String,
    pub category: Category,
    pub columns: Vec<(String, Vec<f64>)>,
    pub directedness: Directedness,
    /// Free-form diagnostics, e.g. non-convergence flags.
    pub notes: Vec<String>,
}

impl NodeSignal {
    pub fn single(
        name: &str,
        component: &str,
        category: Category,
        directedness: Directedness,
        values: Vec<f64>,
    ) -> Self {
        NodeSignal {
            name: name.to_string(),
            category,
            columns: vec![(format!("{name}.{component}"), values)],
            directedness,
            notes: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    /// First column's values.
    pub fn values(&self) -> &[f64] {
        &self.columns[0].1
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Checks node alignment and finiteness.
    pub fn validate(&self, node_count: usize) -> Result<()> {
        for (name, col) in &self.columns {
            if col.len() != node_count {
                return Err(Error::DimensionMismatch {
                    expected: node_count,
                    found: col.len(),
                });
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.clone()));
            }
        }
        Ok(())
    }
}
