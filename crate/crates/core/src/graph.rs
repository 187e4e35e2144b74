//! Transaction graph: loading, undirected views, components and edge-removal perturbation.
//!
//! Nodes are addressed by dense indices `0..node_count`. External ids (as found in the
//! edge and feature files) are kept in a [`NodeIds`] bijection so that every derived
//! artifact can be written back keyed by external id.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_seed;

/// Bijection between external node ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeIds {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeIds {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the map from a list of ids, rejecting duplicates.
    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Self::new();
        for id in ids {
            let id = id.into();
            if out.index.contains_key(&id) {
                return Err(Error::invalid(format!("duplicate node id `{id}`")));
            }
            out.insert(id);
        }
        Ok(out)
    }

    /// Node ids `"0".."n-1"`, mostly for tests and synthetic data.
    pub fn sequential(n: usize) -> Self {
        Self::from_ids((0..n).map(|i| i.to_string())).expect("sequential ids are unique")
    }

    fn insert(&mut self, id: String) -> usize {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let next = self.ids.len();
        self.index.insert(id.clone(), next);
        self.ids.push(id);
        next
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }
}

/// Compressed adjacency lists, each neighbor list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    fn build(n: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (u, _) in pairs.clone() {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        for (u, v) in pairs {
            targets[cursor[u]] = v;
            cursor[u] += 1;
        }
        for u in 0..n {
            targets[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Adjacency { offsets, targets }
    }

    fn of(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Immutable node/edge structure.
///
/// A directed graph keeps its edges as given. An undirected graph (see
/// [`Graph::undirected_view`]) stores every unordered pair once in `edges` and a
/// symmetric adjacency, so [`Graph::neighbors`] lists each neighbor exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    ids: NodeIds,
    edges: Vec<(usize, usize)>,
    out_adj: Adjacency,
    in_adj: Adjacency,
    directed: bool,
}

impl Graph {
    /// Directed graph over `ids` with the given dense-index edges.
    pub fn directed(ids: NodeIds, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::build(ids, edges, true)
    }

    /// Undirected graph; duplicate pairs and self-loops are dropped.
    pub fn undirected(ids: NodeIds, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = ids.len();
        Self::check_endpoints(n, &edges)?;
        let g = Self::build(ids, edges, true)?;
        Ok(g.undirected_view())
    }

    /// Convenience: directed graph on `n` sequentially-named nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::directed(NodeIds::sequential(n), edges.to_vec())
    }

    /// Convenience: undirected graph on `n` sequentially-named nodes.
    pub fn undirected_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::undirected(NodeIds::sequential(n), edges.to_vec())
    }

    fn check_endpoints(n: usize, edges: &[(usize, usize)]) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(Error::invalid(format!(
                "edge ({u}, {v}) references a node outside 0..{n}"
            )));
        }
        Ok(())
    }

    fn build(ids: NodeIds, edges: Vec<(usize, usize)>, directed: bool) -> Result<Self> {
        let n = ids.len();
        Self::check_endpoints(n, &edges)?;
        let (out_adj, in_adj) = if directed {
            (
                Adjacency::build(n, edges.iter().copied()),
                Adjacency::build(n, edges.iter().map(|&(u, v)| (v, u))),
            )
        } else {
            let sym = edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]);
            let adj = Adjacency::build(n, sym);
            (adj.clone(), adj)
        };
        Ok(Graph {
            ids,
            edges,
            out_adj,
            in_adj,
            directed,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn ids(&self) -> &NodeIds {
        &self.ids
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        self.out_adj.of(v)
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        self.in_adj.of(v)
    }

    /// Neighbor list of an undirected graph (equals `out_neighbors`).
    pub fn neighbors(&self, v: usize) -> &[usize] {
        debug_assert!(!self.directed, "neighbors() expects an undirected view");
        self.out_adj.of(v)
    }

    /// Undirected degree, or in+out for a directed graph.
    pub fn degree(&self, v: usize) -> usize {
        if self.directed {
            self.out_adj.of(v).len() + self.in_adj.of(v).len()
        } else {
            self.out_adj.of(v).len()
        }
    }

    /// Symmetric simple view: reciprocal and duplicate pairs collapse to one
    /// undirected edge, self-loops are dropped. Edge order follows first appearance.
    pub fn undirected_view(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        let mut seen = HashSet::with_capacity(self.edges.len());
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                edges.push(key);
            }
        }
        Graph::build(self.ids.clone(), edges, false).expect("endpoints already validated")
    }

    /// Number of unordered pairs `{u, v}` present in both directions.
    pub fn reciprocal_pair_count(&self) -> usize {
        if !self.directed {
            return 0;
        }
        let set: HashSet<(usize, usize)> = self.edges.iter().copied().collect();
        set.iter()
            .filter(|&&(u, v)| u < v && set.contains(&(v, u)))
            .count()
    }

    /// Same node set, different edge list (used by perturbation).
    fn with_edges(&self, edges: Vec<(usize, usize)>) -> Graph {
        Graph::build(self.ids.clone(), edges, self.directed).expect("subset of valid edges")
    }

    /// Writes the edge list keyed by external ids, `txId1,txId2` header included.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "txId1,txId2").map_err(io)?;
        for &(u, v) in &self.edges {
            writeln!(w, "{},{}", self.ids.external(u), self.ids.external(v)).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Whether the first line of an edge file is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header iff neither field of the first row parses as an integer.
    #[default]
    Auto,
    Present,
    Absent,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads a two-column edge file. Nodes are created in order of first appearance.
pub fn load_edge_list(path: &Path) -> Result<Graph> {
    load_edges_impl(path, None, HeaderMode::Auto)
}

/// Reads a two-column edge file against an existing node set (e.g. from the feature
/// table); ids missing from `nodes` are an error.
pub fn load_edge_list_bound(path: &Path, nodes: &NodeIds) -> Result<Graph> {
    load_edges_impl(path, Some(nodes), HeaderMode::Auto)
}

pub fn load_edge_list_with(path: &Path, nodes: Option<&NodeIds>, header: HeaderMode) -> Result<Graph> {
    load_edges_impl(path, nodes, header)
}

fn load_edges_impl(path: &Path, bound: Option<&NodeIds>, header: HeaderMode) -> Result<Graph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ids = bound.cloned().unwrap_or_default();
    let mut edges = Vec::new();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(line);
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected two fields, found {:?}", line),
            ));
        }
        if first {
            first = false;
            let is_header = match header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => fields.iter().all(|f| f.parse::<i64>().is_err()),
            };
            if is_header {
                continue;
            }
        }
        let mut endpoint = |id: &str| -> Result<usize> {
            match bound {
                Some(_) => ids.get(id).ok_or_else(|| {
                    Error::parse(path, lineno + 1, format!("node id `{id}` has no feature row"))
                }),
                None => Ok(ids.insert(id.to_string())),
            }
        };
        let u = endpoint(fields[0])?;
        let v = endpoint(fields[1])?;
        edges.push((u, v));
    }
    if edges.is_empty() && bound.is_none() {
        return Err(Error::EmptyGraph);
    }
    Graph::directed(ids, edges)
}

/// Partition of the node set into connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    pub label: Vec<usize>,
    pub component_sizes: Vec<usize>,
}

impl ComponentLabels {
    pub fn count(&self) -> usize {
        self.component_sizes.len()
    }

    /// Node lists per component, each sorted ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .component_sizes
            .iter()
            .map(|&s| Vec::with_capacity(s))
            .collect();
        for (v, &c) in self.label.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Weakly connected components; component `k` is the one whose lowest node index is
/// the `k`-th smallest among component minima.
pub fn connected_components(g: &Graph) -> ComponentLabels {
    let n = g.node_count();
    let mut label = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        label[start] = c;
        queue.push_back(start);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            let nbrs = g.out_neighbors(u).iter().chain(g.in_neighbors(u));
            for &w in nbrs {
                if label[w] == usize::MAX {
                    label[w] = c;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    ComponentLabels {
        label,
        component_sizes: sizes,
    }
}

/// Edge-removal perturbation: fraction `rho` of edges removed with a seeded RNG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub rho: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(rho: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { rho, seed })
    }

    /// round-half-up(rho * |E|)
    pub fn removal_count(&self, edge_count: usize) -> usize {
        ((self.rho * edge_count as f64) + 0.5).floor() as usize
    }

    /// File name under which the perturbed graph of `dataset` is cached.
    pub fn cache_name(&self, dataset: &str) -> String {
        format!("{dataset}.rho{:.4}.seed{}.edges", self.rho, self.seed)
    }
}

/// Removes exactly `round(rho·|E|)` edges chosen uniformly without replacement.
/// Survivors keep their original relative order; the node set is untouched.
pub fn remove_edges(g: &Graph, spec: PerturbationSpec) -> Graph {
    let m = g.edge_count();
    let k = spec.removal_count(m).min(m);
    if k == 0 {
        return g.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[
        0x7065_7274_7572_62, // "perturb"
        spec.rho.to_bits(),
        spec.seed,
    ]));
    let mut order: Vec<usize> = (0..m).collect();
    let (removed, _) = order.partial_shuffle(&mut rng, k);
    let mut drop = vec![false; m];
    for &i in removed.iter() {
        drop[i] = true;
    }
    let kept = g
        .edges()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&e, _)| e)
        .collect();
    g.with_edges(kept)
}

/// Loads a cached perturbed graph if present, otherwise computes and writes it.
pub fn cached_perturbation(
    g: &Graph,
    spec: PerturbationSpec,
    dataset: &str,
    cache_dir: &Path,
) -> Result<Graph> {
    let path = cache_dir.join(spec.cache_name(dataset));
    if path.exists() {
        let mut cached = load_edge_list_with(&path, Some(g.ids()), HeaderMode::Present)?;
        if !g.is_directed() {
            cached = cached.undirected_view();
        }
        return Ok(cached);
    }
    let out = remove_edges(g, spec);
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    out.write_edge_list(&path)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_cycle() {
        let f = write_tmp("txId1,txId2\na,b\nb,c\nc,a\n");
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 0)]);
        assert!(g.is_directed());
    }

    #[test]
    fn numeric_first_row_is_data() {
        let f = write_tmp("1,2\n2,3\n2,3\n");
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!(g.node_count(), 3);
        // duplicates retained
        assert_eq!(g.edge_count(), 2 + 1);
    }

    #[test]
    fn empty_file_is_error() {
        let f = write_tmp("");
        assert!(matches!(load_edge_list(f.path()), Err(Error::EmptyGraph)));
        let f = write_tmp("txId1,txId2\n");
        assert!(matches!(load_edge_list(f.path()), Err(Error::EmptyGraph)));
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_tmp("1,2\n3\n");
        match load_edge_list(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bound_load_rejects_unknown_ids() {
        let ids = NodeIds::from_ids(["1", "2"]).unwrap();
        let f = write_tmp("1,2\n2,9\n");
        assert!(matches!(
            load_edge_list_bound(f.path(), &ids),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn undirected_view_collapses_reciprocal_pairs() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let u = g.undirected_view();
        assert_eq!(u.edge_count(), 3);
        assert!(!u.is_directed());

        let g = Graph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.reciprocal_pair_count(), 1);
        let u = g.undirected_view();
        assert_eq!(u.edge_count(), 1);
        assert_eq!(u.neighbors(0), &[1]);
        assert_eq!(u.neighbors(1), &[0]);
    }

    #[test]
    fn components_small_cases() {
        let g = Graph::undirected_from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
            .unwrap();
        let c = connected_components(&g);
        assert_eq!(c.component_sizes, vec![3, 3]);
        assert_eq!(c.label, vec![0, 0, 0, 1, 1, 1]);

        let single = Graph::from_edges(1, &[]).unwrap();
        let c = connected_components(&single);
        assert_eq!(c.component_sizes, vec![1]);
    }

    #[test]
    fn removal_counts() {
        let spec = PerturbationSpec::new(0.25, 1).unwrap();
        assert_eq!(spec.removal_count(234_355), 58_589);
        assert_eq!(234_355 - spec.removal_count(234_355), 175_766);
        assert!(PerturbationSpec::new(1.5, 0).is_err());
    }

    #[test]
    fn remove_edges_extremes() {
        let edges: Vec<_> = (0..20).map(|i| (i, (i + 1) % 20)).collect();
        let g = Graph::from_edges(20, &edges).unwrap();
        let same = remove_edges(&g, PerturbationSpec::new(0.0, 3).unwrap());
        assert_eq!(same.edges(), g.edges());
        let none = remove_edges(&g, PerturbationSpec::new(1.0, 3).unwrap());
        assert_eq!(none.edge_count(), 0);
        assert_eq!(none.node_count(), 20);
    }

    #[test]
    fn perturbation_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let edges: Vec<_> = (0..30).map(|i| (i, (i * 7 + 3) % 30)).collect();
        let g = Graph::from_edges(30, &edges).unwrap();
        let spec = PerturbationSpec::new(0.5, 7).unwrap();
        let a = cached_perturbation(&g, spec, "toy", dir.path()).unwrap();
        let b = cached_perturbation(&g, spec, "toy", dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, remove_edges(&g, spec));
    }

    fn bfs_closure(n: usize, edges: &[(usize, usize)]) -> Vec<HashSet<usize>> {
        (0..n)
            .map(|s| {
                let mut seen = HashSet::from([s]);
                let mut frontier = vec![s];
                while let Some(u) = frontier.pop() {
                    for &(a, b) in edges {
                        for (x, y) in [(a, b), (b, a)] {
                            if x == u && seen.insert(y) {
                                frontier.push(y);
                            }
                        }
                    }
                }
                seen
            })
            .collect()
    }

    fn arb_edges(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1..max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..(2 * n))))
    }

    proptest! {
        #[test]
        fn components_match_bfs_closure((n, edges) in arb_edges(50)) {
            let g = Graph::from_edges(n, &edges).unwrap();
            let c = connected_components(&g);
            let closure = bfs_closure(n, &edges);
            for u in 0..n {
                for v in 0..n {
                    prop_assert_eq!(c.label[u] == c.label[v], closure[u].contains(&v));
                }
            }
            prop_assert_eq!(c.component_sizes.iter().sum::<usize>(), n);
        }

        #[test]
        fn components_invariant_under_edge_permutation((n, mut edges) in arb_edges(30), seed in any::<u64>()) {
            let a = connected_components(&Graph::from_edges(n, &edges).unwrap());
            edges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = connected_components(&Graph::from_edges(n, &edges).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn undirected_view_is_idempotent((n, edges) in arb_edges(30)) {
            let g = Graph::from_edges(n, &edges).unwrap();
            let once = g.undirected_view();
            prop_assert_eq!(once.undirected_view(), once.clone());
            let pairs: HashSet<_> = once.edges().iter().copied().collect();
            prop_assert_eq!(pairs.len(), once.edge_count());
        }

        #[test]
        fn removal_is_ordered_subset((n, edges) in arb_edges(40), rho in 0.0f64..=1.0, seed in any::<u64>()) {
            let g = Graph::from_edges(n, &edges).unwrap();
            let spec = PerturbationSpec::new(rho, seed).unwrap();
            let out = remove_edges(&g, spec);
            prop_assert_eq!(out.edge_count(), g.edge_count() - spec.removal_count(g.edge_count()));
            prop_assert_eq!(out.node_count(), g.node_count());
            // ordered subsequence check
            let mut it = g.edges().iter();
            for e in out.edges() {
                prop_assert!(it.any(|x| x == e));
            }
            prop_assert_eq!(remove_edges(&g, spec), out);
        }
    }
}
