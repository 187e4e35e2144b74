//! Stratified 60/20/20 splits shared by every configuration of a seed.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Label, LabelVector};
use crate::error::{Error, Result};
use crate::graph::NodeIds;
use crate::rng::{stream_rng, tag};

pub const MIN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// SHA-256 over the sorted index sets.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let mut s = set.clone();
            s.sort_unstable();
            h.update(name.as_bytes());
            for i in s {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-class 60/20/20 allocation; the remainder goes to train, then val, then test.
pub fn allocation(count: usize) -> [usize; 3] {
    let mut sizes = [count * 6 / 10, count * 2 / 10, count * 2 / 10];
    let mut rest = count - sizes.iter().sum::<usize>();
    let mut k = 0;
    while rest > 0 {
        sizes[k % 3] += 1;
        rest -= 1;
        k += 1;
    }
    sizes
}

pub fn stratified_split(labels: &LabelVector, seed: u64) -> Result<SplitSpec> {
    let mut spec = SplitSpec { seed, train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for class in [Label::Illicit, Label::Licit] {
        let mut members: Vec<usize> = labels.0.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
        if members.len() < MIN_CLASS_SIZE {
            return Err(Error::invalid(format!(
                "class {class:?} has {} labeled nodes, need at least {MIN_CLASS_SIZE}",
                members.len()
            )));
        }
        members.shuffle(&mut stream_rng(&[tag("split"), seed, class as u64]));
        let [a, b, _] = allocation(members.len());
        spec.train.extend_from_slice(&members[..a]);
        spec.val.extend_from_slice(&members[a..a + b]);
        spec.test.extend_from_slice(&members[a + b..]);
    }
    for set in [&mut spec.train, &mut spec.val, &mut spec.test] {
        set.sort_unstable();
    }
    Ok(spec)
}

/// Text cache: `# seed=<s> digest=<hex>` then `set,node_id` rows.
pub fn write_split(spec: &SplitSpec, ids: &NodeIds, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(w, "# seed={} digest={}", spec.seed, spec.digest()).map_err(io)?;
    writeln!(w, "set,node_id").map_err(io)?;
    for (name, set) in [("train", &spec.train), ("val", &spec.val), ("test", &spec.test)] {
        for &i in set {
            writeln!(w, "{name},{}", ids.external(i)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_split(path: &Path, ids: &NodeIds) -> Result<SplitSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty split file"))?;
    let field = |key: &str| head.split_whitespace().find_map(|t| t.strip_prefix(key)).map(str::to_string);
    let seed = field("seed=").and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(path, 1, "missing seed"))?;
    let digest = field("digest=");
    let mut spec = SplitSpec { seed, train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (lineno, line) in lines {
        if line.is_empty() || line == "set,node_id" {
            continue;
        }
        let (set, id) = line.split_once(',').ok_or_else(|| Error::parse(path, lineno + 1, "expected set,node_id"))?;
        let v = ids.get(id).ok_or_else(|| Error::parse(path, lineno + 1, format!("unknown node `{id}`")))?;
        match set {
            "train" => spec.train.push(v),
            "val" => spec.val.push(v),
            "test" => spec.test.push(v),
            other => return Err(Error::parse(path, lineno + 1, format!("unknown set `{other}`"))),
        }
    }
    if let Some(d) = digest {
        if d != spec.digest() {
            return Err(Error::parse(path, 1, "digest does not match the listed indices"));
        }
    }
    Ok(spec)
}
