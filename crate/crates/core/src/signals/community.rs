//! Modularity-based community detection (Louvain, Leiden) and the tabular
//! encoding of a partition.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Category, Directedness, NodeSignal};
use crate::graph::{connected_components, Graph};
use crate::rng::{stream_rng, tag};

/// Resolution used for every modularity computation.
pub const RESOLUTION: f64 = 1.0;
/// Randomness of Leiden's refinement merges.
const LEIDEN_THETA: f64 = 0.01;
const EPS: f64 = 1e-12;

/// Community assignment plus the objective value it achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityPartition {
    /// Community index per node, contiguous from 0 in order of first appearance.
    pub assignment: Vec<usize>,
    /// Modularity (Louvain/Leiden) or map-equation codelength in bits (Infomap).
    pub quality: f64,
}

impl CommunityPartition {
    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.community_count()];
        for &c in &self.assignment {
            s[c] += 1;
        }
        s
    }
}

/// Relabels so communities are numbered by their lowest member.
pub(crate) fn normalize_labels(assignment: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; assignment.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    assignment
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect()
}

/// Weighted undirected graph used across aggregation levels. Self loops are kept
/// apart from `adj`; a self loop of weight w contributes 2w to the node strength.
#[derive(Debug, Clone)]
pub(crate) struct WeightedGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub self_loops: Vec<f64>,
    pub strength: Vec<f64>,
    /// Sum of strengths (2m).
    pub total: f64,
}

impl WeightedGraph {
    pub fn from_graph(g: &Graph) -> Self {
        let u = g.undirected_view();
        let n = u.node_count();
        let adj: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|v| u.neighbors(v).iter().map(|&w| (w, 1.0)).collect())
            .collect();
        Self::from_parts(adj, vec![0.0; n])
    }

    fn from_parts(adj: Vec<Vec<(usize, f64)>>, self_loops: Vec<f64>) -> Self {
        let strength: Vec<f64> = adj
            .iter()
            .zip(&self_loops)
            .map(|(a, &s)| a.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        let total = strength.iter().sum();
        WeightedGraph {
            adj,
            self_loops,
            strength,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community into one node.
    pub fn aggregate(&self, assignment: &[usize], count: usize) -> WeightedGraph {
        let mut self_loops = vec![0.0; count];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
        let mut slot = vec![usize::MAX; count];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        for (v, &c) in assignment.iter().enumerate() {
            members[c].push(v);
        }
        for c in 0..count {
            let row = &mut rows[c];
            for &v in &members[c] {
                self_loops[c] += self.self_loops[v];
                for &(w, wt) in &self.adj[v] {
                    let d = assignment[w];
                    if d == c {
                        // each internal edge is seen from both endpoints
                        self_loops[c] += wt / 2.0;
                    } else if slot[d] == usize::MAX {
                        slot[d] = row.len();
                        row.push((d, wt));
                    } else {
                        row[slot[d]].1 += wt;
                    }
                }
            }
            for &(d, _) in row.iter() {
                slot[d] = usize::MAX;
            }
        }
        WeightedGraph::from_parts(rows, self_loops)
    }

    pub fn modularity(&self, assignment: &[usize], resolution: f64) -> f64 {
        if self.total == 0.0 {
            return 0.0;
        }
        let count = assignment.iter().max().map_or(0, |m| m + 1);
        let mut internal = vec![0.0; count];
        let mut tot = vec![0.0; count];
        for v in 0..self.len() {
            let c = assignment[v];
            tot[c] += self.strength[v];
            internal[c] += 2.0 * self.self_loops[v];
            for &(w, wt) in &self.adj[v] {
                if assignment[w] == c {
                    internal[c] += wt;
                }
            }
        }
        let m2 = self.total;
        internal
            .iter()
            .zip(&tot)
            .map(|(&i, &t)| i / m2 - resolution * (t / m2) * (t / m2))
            .sum()
    }
}

/// Newman–Girvan modularity of `assignment` on the undirected view of `g`.
pub fn modularity(g: &Graph, assignment: &[usize]) -> f64 {
    WeightedGraph::from_graph(g).modularity(assignment, RESOLUTION)
}

/// Scratch accumulator of edge weight from one node towards neighboring communities.
struct NeighborWeights {
    weight: Vec<f64>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    fn new(n: usize) -> Self {
        NeighborWeights {
            weight: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    fn collect(&mut self, g: &WeightedGraph, v: usize, assignment: &[usize], filter: impl Fn(usize) -> bool) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
        }
        self.touched.clear();
        for &(w, wt) in &g.adj[v] {
            if !filter(w) {
                continue;
            }
            let c = assignment[w];
            if self.weight[c] == 0.0 {
                self.touched.push(c);
            }
            self.weight[c] += wt;
        }
    }
}

/// One Louvain sweep phase: repeated passes in shuffled order until no node moves.
fn louvain_local_moves(g: &WeightedGraph, assignment: &mut [usize], rng: &mut ChaCha8Rng) -> bool {
    let n = g.len();
    let m2 = g.total;
    let mut tot = vec![0.0; n];
    for v in 0..n {
        tot[assignment[v]] += g.strength[v];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut nw = NeighborWeights::new(n);
    let mut any_move = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let cur = assignment[v];
            let k = g.strength[v];
            nw.collect(g, v, assignment, |_| true);
            tot[cur] -= k;
            let gain = |c: usize, w: f64| w - RESOLUTION * tot[c] * k / m2;
            let mut best = cur;
            let mut best_gain = gain(cur, nw.weight[cur]);
            for &c in &nw.touched {
                let gc = gain(c, nw.weight[c]);
                if gc > best_gain + EPS {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] += k;
            if best != cur {
                assignment[v] = best;
                moved = true;
                any_move = true;
            }
        }
        if !moved {
            break;
        }
    }
    any_move
}

/// Renumbers community ids to `0..count` and returns `count`.
fn compact(assignment: &mut [usize]) -> usize {
    let labels = normalize_labels(assignment);
    let count = labels.iter().max().map_or(0, |m| m + 1);
    assignment.copy_from_slice(&labels);
    count
}

fn singleton_partition(n: usize) -> CommunityPartition {
    CommunityPartition {
        assignment: (0..n).collect(),
        quality: 0.0,
    }
}

/// Greedy modularity optimization with node sweeps and aggregation; node visiting
/// order is shuffled by `seed`.
pub fn louvain(g: &Graph, seed: u64) -> CommunityPartition {
    let base = WeightedGraph::from_graph(g);
    let n = base.len();
    if base.total == 0.0 {
        return singleton_partition(n);
    }
    let mut rng = stream_rng(&[tag("louvain"), seed]);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = base.clone();
    loop {
        let mut assignment: Vec<usize> = (0..level.len()).collect();
        let moved = louvain_local_moves(&level, &mut assignment, &mut rng);
        if !moved {
            break;
        }
        let count = compact(&mut assignment);
        for m in membership.iter_mut() {
            *m = assignment[*m];
        }
        if count == level.len() {
            break;
        }
        level = level.aggregate(&assignment, count);
    }
    let assignment = normalize_labels(&membership);
    let quality = base.modularity(&assignment, RESOLUTION);
    CommunityPartition {
        assignment,
        quality,
    }
}

/// Queue-based local moving phase of Leiden.
fn leiden_fast_local_move(g: &WeightedGraph, assignment: &mut [usize], rng: &mut ChaCha8Rng) {
    let n = g.len();
    let m2 = g.total;
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for v in 0..n {
        tot[assignment[v]] += g.strength[v];
        size[assignment[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];
    let mut nw = NeighborWeights::new(n);
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let cur = assignment[v];
        let k = g.strength[v];
        nw.collect(g, v, assignment, |_| true);
        tot[cur] -= k;
        size[cur] -= 1;
        if size[cur] == 0 {
            empty.push(cur);
        }
        let gain = |c: usize, w: f64| w - RESOLUTION * tot[c] * k / m2;
        let mut best = cur;
        let mut best_gain = gain(cur, nw.weight[cur]);
        for &c in &nw.touched {
            let gc = gain(c, nw.weight[c]);
            if gc > best_gain + EPS {
                best = c;
                best_gain = gc;
            }
        }
        // an empty community has gain 0
        if best_gain < -EPS && size[cur] > 0 {
            best = *empty.last().expect("a node leaving leaves room for one empty community");
        }
        if size[best] == 0 {
            if let Some(pos) = empty.iter().rposition(|&c| c == best) {
                empty.swap_remove(pos);
            }
        }
        tot[best] += k;
        size[best] += 1;
        if best != cur {
            assignment[v] = best;
            for &(w, _) in &g.adj[v] {
                if !queued[w] && assignment[w] != best {
                    queued[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
}

/// Refinement: merges nodes within each community into well-connected subcommunities.
fn leiden_refine(g: &WeightedGraph, partition: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = g.len();
    let m2 = g.total;
    let count = partition.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (v, &c) in partition.iter().enumerate() {
        members[c].push(v);
    }
    let mut refined: Vec<usize> = (0..n).collect();
    let mut r_tot: Vec<f64> = g.strength.clone();
    let mut r_ext = vec![0.0; n]; // weight from refined community to the rest of its community
    let mut r_size = vec![1usize; n];
    let mut nw = NeighborWeights::new(n);
    for group in members.iter_mut() {
        let c = partition[group[0]];
        let c_tot: f64 = group.iter().map(|&v| g.strength[v]).sum();
        for &v in group.iter() {
            r_ext[v] = g.adj[v]
                .iter()
                .filter(|&&(w, _)| partition[w] == c)
                .map(|&(_, wt)| wt)
                .sum();
        }
        group.shuffle(rng);
        for &v in group.iter() {
            let k = g.strength[v];
            let well_connected = r_ext[v] >= RESOLUTION * k * (c_tot - k) / m2 - EPS;
            if r_size[refined[v]] != 1 || !well_connected {
                continue;
            }
            let own = refined[v];
            let v_ext = r_ext[own];
            nw.collect(g, v, &refined, |w| partition[w] == c);
            r_tot[own] = 0.0;
            let mut candidates: Vec<(usize, f64)> = vec![(own, 0.0)];
            for &s in &nw.touched {
                if s == own {
                    continue;
                }
                let s_ok = r_ext[s] >= RESOLUTION * r_tot[s] * (c_tot - r_tot[s]) / m2 - EPS;
                let dh = nw.weight[s] - RESOLUTION * r_tot[s] * k / m2;
                if s_ok && dh >= 0.0 {
                    candidates.push((s, dh));
                }
            }
            let max_dh = candidates.iter().map(|c| c.1).fold(f64::MIN, f64::max);
            let weights: Vec<f64> = candidates
                .iter()
                .map(|&(_, dh)| ((dh - max_dh) / LEIDEN_THETA).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = candidates[candidates.len() - 1].0;
            for (&(s, _), &w) in candidates.iter().zip(&weights) {
                if draw < w {
                    chosen = s;
                    break;
                }
                draw -= w;
            }
            if chosen == own {
                r_tot[own] = k;
                continue;
            }
            let to_chosen = nw.weight[chosen];
            refined[v] = chosen;
            r_tot[chosen] += k;
            r_ext[chosen] += v_ext - 2.0 * to_chosen;
            r_size[own] = 0;
            r_size[chosen] += 1;
        }
    }
    refined
}

/// Splits every community into its connected pieces (never lowers modularity).
fn split_disconnected(g: &WeightedGraph, assignment: &mut [usize]) {
    let n = g.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &(w, _) in &g.adj[u] {
                if label[w] == usize::MAX && assignment[w] == assignment[s] {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    assignment.copy_from_slice(&label);
}

fn leiden_pass(base: &WeightedGraph, start: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut membership: Vec<usize> = (0..base.len()).collect();
    let mut level = base.clone();
    let mut partition = start.to_vec();
    loop {
        leiden_fast_local_move(&level, &mut partition, rng);
        let count = compact(&mut partition);
        if count == level.len() {
            for m in membership.iter_mut() {
                *m = partition[*m];
            }
            break;
        }
        let mut refined = leiden_refine(&level, &partition, rng);
        let mut r_count = compact(&mut refined);
        if r_count == level.len() {
            refined.copy_from_slice(&partition);
            r_count = count;
        }
        // community of each refined block in the coarse partition
        let mut coarse = vec![0usize; r_count];
        for v in 0..level.len() {
            coarse[refined[v]] = partition[v];
        }
        for m in membership.iter_mut() {
            *m = refined[*m];
        }
        level = level.aggregate(&refined, r_count);
        partition = coarse;
    }
    membership
}

/// Leiden: Louvain-style moves followed by a refinement phase, iterated until the
/// partition is stable. Every returned community induces a connected subgraph.
pub fn leiden(g: &Graph, seed: u64) -> CommunityPartition {
    let base = WeightedGraph::from_graph(g);
    let n = base.len();
    if base.total == 0.0 {
        return singleton_partition(n);
    }
    let mut rng = stream_rng(&[tag("leiden"), seed]);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut quality = base.modularity(&assignment, RESOLUTION);
    for _ in 0..16 {
        let mut next = leiden_pass(&base, &assignment, &mut rng);
        split_disconnected(&base, &mut next);
        let next = normalize_labels(&next);
        let q = base.modularity(&next, RESOLUTION);
        if q <= quality + EPS {
            if q >= quality - EPS && next != assignment {
                assignment = next;
                quality = q;
            }
            break;
        }
        assignment = next;
        quality = q;
    }
    CommunityPartition {
        assignment: normalize_labels(&assignment),
        quality,
    }
}

/// Tabular encoding of a partition: index code, community size, and the fraction
/// of each node's (undirected) edges that stay inside its community.
pub fn community_features(name: &str, p: &CommunityPartition, g: &Graph) -> NodeSignal {
    let u = g.undirected_view();
    let n = u.node_count();
    let sizes = p.sizes();
    let code: Vec<f64> = p.assignment.iter().map(|&c| c as f64).collect();
    let size: Vec<f64> = p.assignment.iter().map(|&c| sizes[c] as f64).collect();
    let intra: Vec<f64> = (0..n)
        .map(|v| {
            let nb = u.neighbors(v);
            if nb.is_empty() {
                0.0
            } else {
                let same = nb
                    .iter()
                    .filter(|&&w| p.assignment[w] == p.assignment[v])
                    .count();
                same as f64 / nb.len() as f64
            }
        })
        .collect();
    NodeSignal {
        name: name.to_string(),
        category: Category::Community,
        columns: vec![
            (format!("{name}.code"), code),
            (format!("{name}.size"), size),
            (format!("{name}.intra"), intra),
        ],
        directedness: Directedness::Undirected,
        notes: Vec::new(),
    }
}

/// Whether every community of `assignment` induces a connected subgraph of `g`.
pub fn communities_connected(g: &Graph, assignment: &[usize]) -> bool {
    let u = g.undirected_view();
    let count = assignment.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (v, &c) in assignment.iter().enumerate() {
        members[c].push(v);
    }
    members.iter().filter(|m| !m.is_empty()).all(|m| {
        let ids = crate::graph::NodeIds::sequential(m.len());
        let mut local = std::collections::HashMap::new();
        for (i, &v) in m.iter().enumerate() {
            local.insert(v, i);
        }
        let edges: Vec<(usize, usize)> = m
            .iter()
            .flat_map(|&v| u.neighbors(v).iter().map(move |&w| (v, w)))
            .filter_map(|(v, w)| local.get(&w).map(|&j| (local[&v], j)))
            .collect();
        let sub = Graph::directed(ids, edges).expect("local indices valid");
        connected_components(&sub).count() == 1
    })
}
