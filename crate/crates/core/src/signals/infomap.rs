//! Two-level map equation minimized with Louvain-style greedy moves.
//!
//! Flow model: PageRank visit rates (alpha 0.85) on the directed graph. A walker
//! at a node with out-links follows a link with probability alpha and teleports
//! uniformly otherwise; dangling nodes always teleport. Teleportation counts as
//! module exit flow for the fraction of targets outside the module.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::centrality::{pagerank_scores, PAGERANK_ALPHA};
use super::community::{normalize_labels, CommunityPartition};
use crate::graph::Graph;
use crate::rng::{stream_rng, tag};

const EPS: f64 = 1e-12;

fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Flow network at one aggregation level.
#[derive(Debug, Clone)]
struct FlowLevel {
    /// Original node count inside each level node.
    members: Vec<f64>,
    visit: Vec<f64>,
    /// Flow that teleports out of each level node.
    teleport: Vec<f64>,
    out_links: Vec<Vec<(usize, f64)>>,
    in_links: Vec<Vec<(usize, f64)>>,
    /// Link flow from each level node to other level nodes.
    out_flow: Vec<f64>,
}

impl FlowLevel {
    fn len(&self) -> usize {
        self.visit.len()
    }

    fn aggregate(&self, assignment: &[usize], count: usize) -> FlowLevel {
        let mut members = vec![0.0; count];
        let mut visit = vec![0.0; count];
        let mut teleport = vec![0.0; count];
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
        let mut slot = vec![usize::MAX; count];
        let mut nodes: Vec<Vec<usize>> = vec![Vec::new(); count];
        for (v, &c) in assignment.iter().enumerate() {
            nodes[c].push(v);
            members[c] += self.members[v];
            visit[c] += self.visit[v];
            teleport[c] += self.teleport[v];
        }
        for c in 0..count {
            let row = &mut out[c];
            for &v in &nodes[c] {
                for &(w, f) in &self.out_links[v] {
                    let d = assignment[w];
                    if d == c {
                        continue;
                    }
                    if slot[d] == usize::MAX {
                        slot[d] = row.len();
                        row.push((d, f));
                    } else {
                        row[slot[d]].1 += f;
                    }
                }
            }
            for &(d, _) in row.iter() {
                slot[d] = usize::MAX;
            }
        }
        let mut in_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
        for (c, row) in out.iter().enumerate() {
            for &(d, f) in row {
                in_links[d].push((c, f));
            }
        }
        let out_flow = out.iter().map(|r| r.iter().map(|&(_, f)| f).sum()).collect();
        FlowLevel {
            members,
            visit,
            teleport,
            out_links: out,
            in_links,
            out_flow,
        }
    }
}

/// Flow model of a directed graph (node visit rates, link flows).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    level: FlowLevel,
    node_count: f64,
    /// Sum of plogp over node visit rates (constant across partitions).
    node_entropy_term: f64,
}

impl FlowNetwork {
    pub fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let pr = pagerank_scores(g, PAGERANK_ALPHA, 1000, 1e-15).scores;
        let tau = 1.0 - PAGERANK_ALPHA;
        let mut teleport = vec![0.0; n];
        let mut out_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for v in 0..n {
            let outs = g.out_neighbors(v);
            if outs.is_empty() {
                teleport[v] = pr[v];
                continue;
            }
            teleport[v] = tau * pr[v];
            let f = PAGERANK_ALPHA * pr[v] / outs.len() as f64;
            let row = &mut out_links[v];
            for &w in outs {
                if w == v {
                    continue;
                }
                match row.iter_mut().find(|(t, _)| *t == w) {
                    Some(e) => e.1 += f,
                    None => row.push((w, f)),
                }
            }
        }
        let level0 = FlowLevel {
            members: vec![1.0; n],
            visit: pr.clone(),
            teleport,
            out_links,
            in_links: Vec::new(),
            out_flow: Vec::new(),
        };
        // rebuild in-links and out-flow through an identity aggregation
        let identity: Vec<usize> = (0..n).collect();
        let level = level0.aggregate(&identity, n);
        FlowNetwork {
            level,
            node_count: n as f64,
            node_entropy_term: pr.iter().map(|&p| plogp(p)).sum(),
        }
    }

    /// Two-level codelength (bits) of a partition of the original nodes.
    pub fn codelength(&self, assignment: &[usize]) -> f64 {
        let count = assignment.iter().max().map_or(0, |m| m + 1);
        let mut stats = vec![ModuleStats::default(); count];
        let lv = &self.level;
        for v in 0..lv.len() {
            let m = &mut stats[assignment[v]];
            m.members += lv.members[v];
            m.visit += lv.visit[v];
            m.teleport += lv.teleport[v];
            for &(w, f) in &lv.out_links[v] {
                if assignment[w] != assignment[v] {
                    m.link_exit += f;
                }
            }
        }
        let mut state = CodeState::new(self.node_count, self.node_entropy_term);
        for m in &stats {
            state.add(m);
        }
        state.value()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ModuleStats {
    members: f64,
    visit: f64,
    teleport: f64,
    link_exit: f64,
}

impl ModuleStats {
    fn exit(&self, n: f64) -> f64 {
        self.teleport * (n - self.members) / n + self.link_exit
    }
}

/// Running sums of the map-equation terms.
#[derive(Clone, Copy)]
struct CodeState {
    n: f64,
    exit_sum: f64,
    exit_plogp: f64,
    total_plogp: f64,
    node_term: f64,
}

impl CodeState {
    fn new(n: f64, node_term: f64) -> Self {
        CodeState {
            n,
            exit_sum: 0.0,
            exit_plogp: 0.0,
            total_plogp: 0.0,
            node_term,
        }
    }

    fn add(&mut self, m: &ModuleStats) {
        let q = m.exit(self.n);
        self.exit_sum += q;
        self.exit_plogp += plogp(q);
        self.total_plogp += plogp(q + m.visit);
    }

    fn remove(&mut self, m: &ModuleStats) {
        let q = m.exit(self.n);
        self.exit_sum -= q;
        self.exit_plogp -= plogp(q);
        self.total_plogp -= plogp(q + m.visit);
    }

    fn value(&self) -> f64 {
        plogp(self.exit_sum) - 2.0 * self.exit_plogp + self.total_plogp - self.node_term
    }
}

/// Greedy moves at one level; returns whether any node moved.
fn local_moves(
    lv: &FlowLevel,
    n: f64,
    node_term: f64,
    assignment: &mut [usize],
    rng: &mut ChaCha8Rng,
) -> bool {
    let size = lv.len();
    let mut modules = vec![ModuleStats::default(); size];
    for v in 0..size {
        let m = &mut modules[assignment[v]];
        m.members += lv.members[v];
        m.visit += lv.visit[v];
        m.teleport += lv.teleport[v];
        for &(w, f) in &lv.out_links[v] {
            if assignment[w] != assignment[v] {
                m.link_exit += f;
            }
        }
    }
    let mut state = CodeState::new(n, node_term);
    for m in &modules {
        state.add(m);
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.shuffle(rng);
    let mut out_to = vec![0.0; size];
    let mut in_from = vec![0.0; size];
    let mut touched: Vec<usize> = Vec::new();
    let mut mark = vec![false; size];
    let mut any = false;
    for _sweep in 0..64 {
        let mut moved = false;
        for &v in &order {
            let cur = assignment[v];
            for &c in &touched {
                out_to[c] = 0.0;
                in_from[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
            for &(w, f) in &lv.out_links[v] {
                let c = assignment[w];
                if !mark[c] {
                    mark[c] = true;
                    touched.push(c);
                }
                out_to[c] += f;
            }
            for &(w, f) in &lv.in_links[v] {
                let c = assignment[w];
                if !mark[c] {
                    mark[c] = true;
                    touched.push(c);
                }
                in_from[c] += f;
            }
            let node = ModuleStats {
                members: lv.members[v],
                visit: lv.visit[v],
                teleport: lv.teleport[v],
                link_exit: 0.0,
            };
            let old_from = modules[cur];
            let from_after = ModuleStats {
                members: old_from.members - node.members,
                visit: old_from.visit - node.visit,
                teleport: old_from.teleport - node.teleport,
                link_exit: old_from.link_exit - (lv.out_flow[v] - out_to[cur]) + in_from[cur],
            };
            let base = state.value();
            let mut best: Option<(usize, ModuleStats, ModuleStats, CodeState)> = None;
            let mut best_delta = -EPS;
            let candidates = touched.iter().copied().filter(|&c| c != cur);
            for c in candidates {
                let old_to = modules[c];
                let to_after = ModuleStats {
                    members: old_to.members + node.members,
                    visit: old_to.visit + node.visit,
                    teleport: old_to.teleport + node.teleport,
                    link_exit: old_to.link_exit + (lv.out_flow[v] - out_to[c]) - in_from[c],
                };
                let mut trial = state;
                trial.remove(&old_from);
                trial.remove(&old_to);
                trial.add(&from_after);
                trial.add(&to_after);
                let delta = trial.value() - base;
                if delta < best_delta {
                    best_delta = delta;
                    best = Some((c, from_after, to_after, trial));
                }
            }
            if let Some((c, fa, ta, trial)) = best {
                modules[cur] = fa;
                modules[c] = ta;
                state = trial;
                assignment[v] = c;
                moved = true;
                any = true;
            }
        }
        if !moved {
            break;
        }
    }
    any
}

/// Two-level Infomap on the directed graph. `quality` is the final codelength in bits.
pub fn infomap(g: &Graph, seed: u64) -> CommunityPartition {
    let net = FlowNetwork::new(g);
    let n = g.node_count();
    let mut rng = stream_rng(&[tag("infomap"), seed]);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = net.level.clone();
    loop {
        let mut assignment: Vec<usize> = (0..level.len()).collect();
        let moved = local_moves(&level, net.node_count, net.node_entropy_term, &mut assignment, &mut rng);
        if !moved {
            break;
        }
        let labels = normalize_labels(&assignment);
        let count = labels.iter().max().map_or(0, |m| m + 1);
        for m in membership.iter_mut() {
            *m = labels[*m];
        }
        if count == level.len() {
            break;
        }
        level = level.aggregate(&labels, count);
    }
    let assignment = normalize_labels(&membership);
    let quality = net.codelength(&assignment);
    CommunityPartition {
        assignment,
        quality,
    }
}

/// Codelength of `assignment` under the flow model of `g`.
pub fn map_equation(g: &Graph, assignment: &[usize]) -> f64 {
    FlowNetwork::new(g).codelength(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete_digraph(offset: usize, k: usize) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    e.push((offset + i, offset + j));
                }
            }
        }
        e
    }

    fn two_dense_modules() -> Graph {
        let mut e = complete_digraph(0, 5);
        e.extend(complete_digraph(5, 5));
        e.push((4, 5));
        e.push((5, 4));
        Graph::from_edges(10, &e).unwrap()
    }

    #[test]
    fn single_module_codelength_is_visit_entropy() {
        let g = two_dense_modules();
        let pr = pagerank_scores(&g, PAGERANK_ALPHA, 1000, 1e-15).scores;
        let h: f64 = -pr.iter().map(|&p| plogp(p)).sum::<f64>();
        let l = map_equation(&g, &[0; 10]);
        assert!((l - h).abs() < 1e-12, "{l} vs {h}");
    }

    #[test]
    fn split_beats_merged_and_is_found() {
        let g = two_dense_modules();
        let split = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert!(map_equation(&g, &split) < map_equation(&g, &[0; 10]));
        let p = infomap(&g, 7);
        assert_eq!(p.assignment, split.to_vec());
    }

    #[test]
    fn never_worse_than_singletons() {
        let edges: Vec<_> = (0..40).map(|i| (i % 20, (i * 7 + 3) % 20)).collect();
        let g = Graph::from_edges(20, &edges).unwrap();
        let p = infomap(&g, 1);
        let singles: Vec<usize> = (0..20).collect();
        assert!(p.quality <= map_equation(&g, &singles) + 1e-9);
        assert!((p.quality - map_equation(&g, &p.assignment)).abs() < 1e-9);
    }

    #[test]
    fn empty_graph_is_singletons() {
        let g = Graph::from_edges(3, &[]).unwrap();
        let p = infomap(&g, 0);
        assert_eq!(p.assignment.len(), 3);
        assert!(p.quality.is_finite());
    }
}
