//! Planted-partition datasets written in the Elliptic file layout.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, Graph, NodeIds};
use crate::rng::{stream_rng, tag};
use crate::signals::louvain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Planted communities, flagged ones included.
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Intra-community probability of flagged communities; `p_in` when absent.
    pub p_flagged: Option<f64>,
    /// Share of nodes placed in flagged communities.
    pub positive_rate: f64,
    pub flagged: usize,
    /// Label noise: flagged members turn licit with this probability, and the
    /// same expected number of positives is scattered over the other nodes.
    pub noise: f64,
    pub n_features: usize,
    /// Leading feature columns whose mean shifts by one for illicit nodes.
    pub informative: usize,
    /// Standard deviation of the feature noise.
    pub feature_noise: f64,
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 2000,
            k: 8,
            p_in: 0.05,
            p_out: 0.001,
            p_flagged: None,
            positive_rate: 0.03,
            flagged: 1,
            noise: 0.1,
            n_features: 16,
            informative: 4,
            feature_noise: 1.0,
            labeled_fraction: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("synthetic {name} must lie in [0, 1], got {p}")))
            }
        };
        prob("p_in", self.p_in)?;
        prob("p_out", self.p_out)?;
        prob("p_flagged", self.flagged_p_in())?;
        prob("positive_rate", self.positive_rate)?;
        prob("noise", self.noise)?;
        prob("labeled_fraction", self.labeled_fraction)?;
        if self.p_out > self.p_in.min(self.flagged_p_in()) {
            return Err(Error::Config(format!(
                "p_out ({}) exceeds p_in ({}); no planted structure",
                self.p_out, self.p_in
            )));
        }
        if self.k < 2 || self.flagged == 0 || self.flagged >= self.k {
            return Err(Error::Config(format!(
                "need k >= 2 and 0 < flagged < k, got k={} flagged={}",
                self.k, self.flagged
            )));
        }
        if self.informative > self.n_features || self.n_features == 0 {
            return Err(Error::Config("need 0 < n_features and informative <= n_features".into()));
        }
        if !(self.feature_noise > 0.0) {
            return Err(Error::Config("feature_noise must be positive".into()));
        }
        let sizes = self.community_sizes();
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("n={} too small for the requested communities: {sizes:?}", self.n)));
        }
        Ok(())
    }

    pub fn flagged_p_in(&self) -> f64 {
        self.p_flagged.unwrap_or(self.p_in)
    }

    /// Flagged communities first, then the rest with sizes growing linearly.
    pub fn community_sizes(&self) -> Vec<usize> {
        let positives = (self.positive_rate * self.n as f64).round() as usize;
        let mut sizes = spread(positives, &vec![1.0; self.flagged]);
        let others = self.k - self.flagged;
        let w: Vec<f64> = (0..others).map(|j| 1.0 + j as f64 / others as f64).collect();
        sizes.extend(spread(self.n.saturating_sub(positives), &w));
        sizes
    }
}

/// Largest-remainder apportionment of `total` by weight.
fn spread(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// Generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub ids: NodeIds,
    pub edges: Vec<(usize, usize)>,
    pub community: Vec<usize>,
    pub flagged: Vec<usize>,
    /// 1 illicit, 0 licit, None unlabeled.
    pub labels: Vec<Option<u8>>,
    /// Row-major, `n_features + 1` columns (time step first).
    pub features: Vec<f64>,
    pub width: usize,
}

/// Calls `hit` for every index in `0..count` kept by independent Bernoulli(p)
/// trials, skipping geometrically between hits.
fn bernoulli_indices(count: u64, p: f64, rng: &mut impl Rng, mut hit: impl FnMut(u64)) {
    if p <= 0.0 || count == 0 {
        return;
    }
    if p >= 1.0 {
        (0..count).for_each(hit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut i: u64 = 0;
    loop {
        let u: f64 = rng.random::<f64>();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (count - i) as f64 {
            return;
        }
        i += skip as u64;
        hit(i);
        i += 1;
        if i >= count {
            return;
        }
    }
}

/// Maps increasing pair indices of `0..s` (lexicographic a < b) back to pairs,
/// resuming from the previous lookup.
struct PairCursor {
    start: u64,
    row: u64,
    len: u64,
}

impl PairCursor {
    fn new(s: u64) -> Self {
        PairCursor { start: 0, row: 0, len: s - 1 }
    }

    fn locate(&mut self, idx: u64) -> (u64, u64) {
        let mut rem = idx - self.start;
        while rem >= self.len {
            rem -= self.len;
            self.start += self.len;
            self.row += 1;
            self.len -= 1;
        }
        (self.row, self.row + 1 + rem)
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.n;
    let sizes = spec.community_sizes();

    // community membership over a shuffled node order
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(&[tag("synth-order"), spec.seed]));
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(sizes.len());
    let mut community = vec![0; n];
    let mut at = 0;
    for (c, &s) in sizes.iter().enumerate() {
        let mut m: Vec<usize> = order[at..at + s].to_vec();
        m.sort_unstable();
        for &v in &m {
            community[v] = c;
        }
        members.push(m);
        at += s;
    }

    let mut edges = Vec::new();
    for a in 0..sizes.len() {
        for b in a..sizes.len() {
            let mut rng = stream_rng(&[tag("synth-edges"), spec.seed, a as u64, b as u64]);
            let (ma, mb) = (&members[a], &members[b]);
            let mut pairs = Vec::new();
            if a == b {
                let s = ma.len() as u64;
                if s >= 2 {
                    let mut cursor = PairCursor::new(s);
                    let p = if a < spec.flagged { spec.flagged_p_in() } else { spec.p_in };
                    bernoulli_indices(s * (s - 1) / 2, p, &mut rng, |idx| {
                        let (x, y) = cursor.locate(idx);
                        pairs.push((ma[x as usize], ma[y as usize]));
                    });
                }
            } else {
                let sb = mb.len() as u64;
                bernoulli_indices(ma.len() as u64 * sb, spec.p_out, &mut rng, |idx| {
                    pairs.push((ma[(idx / sb) as usize], mb[(idx % sb) as usize]));
                });
            }
            for (u, v) in pairs {
                edges.push(if rng.random::<bool>() { (u, v) } else { (v, u) });
            }
        }
    }

    let flagged: Vec<usize> = (0..spec.flagged).collect();
    let in_flagged = |v: usize| community[v] < spec.flagged;
    let flagged_size: usize = sizes[..spec.flagged].iter().sum();
    let outside_rate = if n > flagged_size { spec.noise * flagged_size as f64 / (n - flagged_size) as f64 } else { 0.0 };
    let mut rng = stream_rng(&[tag("synth-labels"), spec.seed]);
    let mut labels: Vec<Option<u8>> = (0..n)
        .map(|v| {
            let u: f64 = rng.random();
            Some(if in_flagged(v) { (u >= spec.noise) as u8 } else { (u < outside_rate) as u8 })
        })
        .collect();
    if spec.labeled_fraction < 1.0 {
        for l in labels.iter_mut() {
            if rng.random::<f64>() >= spec.labeled_fraction {
                *l = None;
            }
        }
    }

    let width = spec.n_features + 1;
    let mut features = Vec::with_capacity(n * width);
    let noise = Normal::new(0.0, spec.feature_noise).map_err(|e| Error::Config(e.to_string()))?;
    for (v, label) in labels.iter().enumerate() {
        let mut rng = stream_rng(&[tag("synth-features"), spec.seed, v as u64]);
        features.push((1 + v % 49) as f64);
        let shift = f64::from(label.unwrap_or(0));
        for j in 0..spec.n_features {
            let mean = if j < spec.informative { shift } else { 0.0 };
            features.push(mean + noise.sample(&mut rng));
        }
    }

    let ids = NodeIds::from_ids((0..n).map(|v| (100_000 + v).to_string()))?;
    Ok(SyntheticData { ids, edges, community, flagged, labels, features, width })
}

/// Paths of a dataset laid out like Elliptic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub classes: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetFiles {
            edges: dir.join("edgelist.csv"),
            features: dir.join("features.csv"),
            classes: dir.join("classes.csv"),
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

impl SyntheticData {
    pub fn graph(&self) -> Result<Graph> {
        Graph::directed(self.ids.clone(), self.edges.clone())
    }

    /// Writes edge, feature and class files plus `communities.csv` with the
    /// planted partition.
    pub fn write(&self, dir: &Path) -> Result<DatasetFiles> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = DatasetFiles::in_dir(dir);


        let mut w = writer(&files.edges)?;
        writeln!(w, "txId1,txId2").map_err(io(&files.edges))?;
        for &(u, v) in &self.edges {
            writeln!(w, "{},{}", self.ids.external(u), self.ids.external(v)).map_err(io(&files.edges))?;
        }
        w.flush().map_err(io(&files.edges))?;

        let mut w = writer(&files.features)?;
        for (v, row) in self.features.chunks(self.width).enumerate() {
            write!(w, "{}", self.ids.external(v)).map_err(io(&files.features))?;
            for x in row {
                write!(w, ",{x:?}").map_err(io(&files.features))?;
            }
            writeln!(w).map_err(io(&files.features))?;
        }
        w.flush().map_err(io(&files.features))?;

        let mut w = writer(&files.classes)?;
        writeln!(w, "txId,class").map_err(io(&files.classes))?;
        for (v, l) in self.labels.iter().enumerate() {
            let class = match l {
                Some(1) => "1",
                Some(_) => "2",
                None => "unknown",
            };
            writeln!(w, "{},{class}", self.ids.external(v)).map_err(io(&files.classes))?;
        }
        w.flush().map_err(io(&files.classes))?;

        let path = dir.join("communities.csv");
        let mut w = writer(&path)?;
        writeln!(w, "node_id,community,flagged").map_err(io(&path))?;
        for (v, &c) in self.community.iter().enumerate() {
            writeln!(w, "{},{c},{}", self.ids.external(v), u8::from(self.flagged.contains(&c))).map_err(io(&path))?;
        }
        w.flush().map_err(io(&path))?;
        Ok(files)
    }
}

/// Adjusted Rand index between two labelings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&x| c2(x)).sum();
    let rows: f64 = (0..ka).map(|i| c2(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfCheck {
    pub louvain_ari: f64,
    pub positives: usize,
    pub labeled: usize,
    pub largest_component: usize,
}

/// Recovers the planted partition with Louvain on the undirected view.
pub fn self_check(data: &SyntheticData, seed: u64) -> Result<SelfCheck> {
    let g = data.graph()?;
    let found = louvain(&g.undirected_view(), seed);
    let comps = connected_components(&g);
    Ok(SelfCheck {
        louvain_ari: adjusted_rand_index(&found.assignment, &data.community),
        positives: data.labels.iter().filter(|l| **l == Some(1)).count(),
        labeled: data.labels.iter().filter(|l| l.is_some()).count(),
        largest_component: comps.component_sizes.iter().copied().max().unwrap_or(0),
    })
}
