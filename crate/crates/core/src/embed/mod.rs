//! Proximity, spectral and structural-role embeddings, plus ingestion of
//! externally trained embeddings.

pub mod graphwave;
pub mod lanczos;
pub mod role;
pub mod skipgram;
pub mod spectral;
pub mod structural;
pub mod walks;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::NodeIds;
use crate::signals::{Category, Directedness, NodeSignal};

pub use graphwave::{graphwave, WaveletConfig};
pub use role::role2vec;
pub use skipgram::{skipgram_train, SkipGramConfig};
pub use spectral::spectral_embedding;
pub use structural::struct_layer_embedding;
pub use walks::{generate_walks, node2vec_variant, Node2VecVariant, WalkConfig};

/// Default embedding width.
pub const EMBEDDING_DIM: usize = 64;

/// Dense `node_count x dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub generator: String,
    pub seed: u64,
    dim: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn new(generator: impl Into<String>, seed: u64, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim == 0 || data.len() % dim == 0, "data length not a multiple of dim");
        Embedding {
            generator: generator.into(),
            seed,
            dim,
            data,
        }
    }

    pub fn zeros(generator: impl Into<String>, seed: u64, rows: usize, dim: usize) -> Self {
        Self::new(generator, seed, dim, vec![0.0; rows * dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Column-wise view as a [`NodeSignal`] named `<generator>.<j>`.
    pub fn into_signal(self, category: Category) -> NodeSignal {
        let columns = (0..self.dim)
            .map(|j| {
                let col = (0..self.rows()).map(|v| self.data[v * self.dim + j]).collect();
                (format!("{}.{j}", self.generator), col)
            })
            .collect();
        NodeSignal {
            name: self.generator.clone(),
            category,
            columns,
            directedness: Directedness::Undirected,
            notes: Vec::new(),
        }
    }

    /// Writes the shared embedding format: header `node_id,dim=<d>`, then one row
    /// per node with values in shortest round-trip precision.
    pub fn write(&self, ids: &NodeIds, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "node_id,dim={}", self.dim).map_err(io)?;
        for v in 0..self.rows() {
            write!(w, "{}", ids.external(v)).map_err(io)?;
            for x in self.row(v) {
                write!(w, ",{x:?}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads an embedding file and aligns its rows to `ids`.
pub fn load_embedding_file(path: &Path, ids: &NodeIds, generator: &str) -> Result<Embedding> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty embedding file"))?;
    let dim: usize = header
        .split(',')
        .nth(1)
        .and_then(|f| f.trim().strip_prefix("dim="))
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, format!("bad header {header:?}, expected node_id,dim=<d>")))?;
    let n = ids.len();
    let mut data = vec![0.0; n * dim];
    let mut seen = vec![false; n];
    for (lineno, line) in lines {
        let mut fields = line.split(',').map(str::trim);
        let id = fields.next().unwrap_or_default();
        let v = ids.get(id).ok_or_else(|| {
            Error::parse(path, lineno + 1, format!("node id `{id}` is not in the graph"))
        })?;
        if seen[v] {
            return Err(Error::parse(path, lineno + 1, format!("node id `{id}` appears twice")));
        }
        seen[v] = true;
        let mut count = 0;
        for (j, f) in fields.enumerate() {
            if j >= dim {
                count = j + 1;
                break;
            }
            let x: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("non-numeric value {f:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(path, lineno + 1, "non-finite value"));
            }
            data[v * dim + j] = x;
            count = j + 1;
        }
        if count != dim {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {dim} values, found {count}"),
            ));
        }
    }
    let missing: Vec<String> = (0..n).filter(|&v| !seen[v]).map(|v| ids.external(v).to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingNodes {
            count: missing.len(),
            first: missing.into_iter().take(10).collect(),
        });
    }
    Ok(Embedding::new(generator, 0, dim, data))
}

/// Mean cosine similarity over the given node pairs.
pub fn mean_cosine(e: &Embedding, pairs: impl IntoIterator<Item = (usize, usize)>) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for (a, b) in pairs {
        total += cosine(e.row(a), e.row(b));
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip_preserves_values() {
        let ids = NodeIds::from_ids(["a", "b", "c"]).unwrap();
        let e = Embedding::new("gcl", 0, 2, vec![0.1, -2.5e-17, 3.0, 1.0 / 3.0, 7.0, 8.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        e.write(&ids, &p).unwrap();
        let back = load_embedding_file(&p, &ids, "gcl").unwrap();
        assert_eq!(back.as_slice(), e.as_slice());
        assert_eq!(back.dim(), 2);
    }

    #[test]
    fn missing_node_is_reported() {
        let ids = NodeIds::from_ids(["a", "b", "c"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        fs::write(&p, "node_id,dim=1\na,1.0\nc,2.0\n").unwrap();
        match load_embedding_file(&p, &ids, "x") {
            Err(Error::MissingNodes { count, first }) => {
                assert_eq!(count, 1);
                assert_eq!(first, vec!["b".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_value_is_rejected_with_row() {
        let ids = NodeIds::from_ids(["a"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        fs::write(&p, "node_id,dim=2\na,1.0,NaN\n").unwrap();
        assert!(matches!(
            load_embedding_file(&p, &ids, "x"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn into_signal_names_columns() {
        let e = Embedding::new("deepwalk", 1, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let s = e.into_signal(Category::Proximity);
        assert_eq!(s.columns[1].0, "deepwalk.1");
        assert_eq!(s.columns[1].1, vec![2.0, 4.0]);
    }
}
