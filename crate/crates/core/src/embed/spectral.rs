//! Laplacian eigenmaps.

use nalgebra::{DMatrix, SymmetricEigen};

use super::lanczos::largest_eigenpairs;
use super::Embedding;
use crate::graph::{connected_components, Graph};

/// Components at least this large use the sparse solver.
pub const DENSE_LIMIT: usize = 1000;

/// Local view of one connected component.
pub(crate) struct Component {
    pub nodes: Vec<usize>,
    pub adj: Vec<Vec<usize>>,
}

impl Component {
    pub fn split(g: &Graph) -> Vec<Component> {
        let labels = connected_components(g);
        let mut local = vec![0usize; g.node_count()];
        let members = labels.members();
        for nodes in &members {
            for (i, &v) in nodes.iter().enumerate() {
                local[v] = i;
            }
        }
        members
            .into_iter()
            .map(|nodes| {
                let adj = nodes
                    .iter()
                    .map(|&v| g.neighbors(v).iter().map(|&u| local[u]).collect())
                    .collect();
                Component { nodes, adj }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut l = DMatrix::zeros(m, m);
        for (i, nbrs) in self.adj.iter().enumerate() {
            l[(i, i)] = nbrs.len() as f64;
            for &j in nbrs {
                l[(i, j)] -= 1.0;
            }
        }
        l
    }

    pub fn laplacian_apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, nbrs) in self.adj.iter().enumerate() {
            y[i] = nbrs.len() as f64 * x[i] - nbrs.iter().map(|&j| x[j]).sum::<f64>();
        }
    }

    fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Eigenpairs (ascending) of a component's Laplacian.
pub(crate) struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// All eigenpairs, ascending, via dense decomposition.
pub(crate) fn dense_spectrum(c: &Component) -> Spectrum {
    let eig = SymmetricEigen::new(c.laplacian());
    let m = c.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Spectrum {
        values: order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect(),
    }
}

/// The `want` smallest eigenpairs via Lanczos on `cI - L`. With
/// `skip_constant` the constant eigenvector is deflated and not returned.
pub(crate) fn sparse_spectrum(c: &Component, want: usize, skip_constant: bool) -> Spectrum {
    let m = c.len();
    let shift = 2.0 * c.max_degree() as f64;
    let ones = vec![1.0 / (m as f64).sqrt(); m];
    let locked = if skip_constant { vec![ones] } else { Vec::new() };
    let r = largest_eigenpairs(
        m,
        want,
        |x, y| {
            c.laplacian_apply(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = shift * xi - *yi;
            }
        },
        &locked,
        shift,
        0,
    );
    Spectrum {
        values: r.values.iter().map(|v| (shift - v).max(0.0)).collect(),
        vectors: r.vectors,
    }
}

/// Flips `v` so its first entry with magnitude above noise is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-10) {
        if *x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

/// Rows hold the `dim` smallest non-trivial Laplacian eigenvectors of the
/// node's component, ascending; missing columns stay zero.
pub fn spectral_embedding(g: &Graph, dim: usize) -> Embedding {
    let g = if g.is_directed() { g.undirected_view() } else { g.clone() };
    let mut e = Embedding::zeros("spectral", 0, g.node_count(), dim);
    for c in Component::split(&g) {
        let m = c.len();
        let take = dim.min(m.saturating_sub(1));
        if take == 0 {
            continue;
        }
        let vectors = if m < DENSE_LIMIT {
            let s = dense_spectrum(&c);
            s.vectors.into_iter().skip(1).take(take).collect::<Vec<_>>()
        } else {
            sparse_spectrum(&c, take, true).vectors
        };
        for (j, mut v) in vectors.into_iter().enumerate() {
            fix_sign(&mut v);
            for (i, &node) in c.nodes.iter().enumerate() {
                e.row_mut(node)[j] = v[i];
            }
        }
    }
    e
}
