//! Heat-wavelet characteristic-function embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::spectral::{dense_spectrum, sparse_spectrum, Component, Spectrum, DENSE_LIMIT};
use super::{Embedding, EMBEDDING_DIM};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletConfig {
    pub n_scales: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Components at least this large use a truncated spectrum.
    pub eigen_cutoff: usize,
    pub retained_eigenpairs: usize,
    /// Points of the characteristic function per scale, evenly spaced in `[0, t_max]`.
    pub sample_points: usize,
    pub t_max: f64,
    pub target_dim: usize,
    pub projection_seed: u64,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            n_scales: 6,
            tau_min: 1e-2,
            tau_max: 1e1,
            eigen_cutoff: DENSE_LIMIT,
            retained_eigenpairs: 32,
            sample_points: 16,
            t_max: 2.0,
            target_dim: EMBEDDING_DIM,
            projection_seed: 42,
        }
    }
}

impl WaveletConfig {
    /// Log-spaced diffusion scales from `tau_min` to `tau_max` inclusive.
    pub fn scales(&self) -> Vec<f64> {
        assert!(self.n_scales >= 1 && self.tau_min < self.tau_max);
        if self.n_scales == 1 {
            return vec![self.tau_min];
        }
        let (a, b) = (self.tau_min.ln(), self.tau_max.ln());
        (0..self.n_scales)
            .map(|s| (a + (b - a) * s as f64 / (self.n_scales - 1) as f64).exp())
            .collect()
    }

    pub fn sample_grid(&self) -> Vec<f64> {
        if self.sample_points == 1 {
            return vec![0.0];
        }
        (0..self.sample_points)
            .map(|k| self.t_max * k as f64 / (self.sample_points - 1) as f64)
            .collect()
    }

    pub fn raw_dim(&self) -> usize {
        self.n_scales * self.sample_points * 2
    }

    /// Node-independent Gaussian projection, entries N(0, 1/target_dim), row-major `raw_dim x target_dim`.
    pub fn projection(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.projection_seed);
        let normal = Normal::new(0.0, (1.0 / self.target_dim as f64).sqrt()).expect("positive sd");
        (0..self.raw_dim() * self.target_dim).map(|_| normal.sample(&mut rng)).collect()
    }
}

/// Unprojected features: per scale, Re then Im of the characteristic function
/// of the node's wavelet coefficients over its component.
pub fn characteristic_features(g: &Graph, cfg: &WaveletConfig) -> Embedding {
    let g = if g.is_directed() { g.undirected_view() } else { g.clone() };
    let scales = cfg.scales();
    let grid = cfg.sample_grid();
    let raw = cfg.raw_dim();
    let mut out = Embedding::zeros("graphwave.raw", 0, g.node_count(), raw);
    for c in Component::split(&g) {
        let m = c.len();
        let Spectrum { values, vectors } = if m < cfg.eigen_cutoff {
            dense_spectrum(&c)
        } else {
            sparse_spectrum(&c, cfg.retained_eigenpairs.min(m), false)
        };
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| {
                let mut row = vec![0.0; raw];
                let mut psi = vec![0.0; m];
                for (s, &tau) in scales.iter().enumerate() {
                    psi.iter_mut().for_each(|x| *x = 0.0);
                    for (lam, u) in values.iter().zip(&vectors) {
                        let w = (-tau * lam).exp() * u[a];
                        for (p, ub) in psi.iter_mut().zip(u) {
                            *p += w * ub;
                        }
                    }
                    let base = s * grid.len() * 2;
                    for (k, &t) in grid.iter().enumerate() {
                        let (mut re, mut im) = (0.0, 0.0);
                        for &p in &psi {
                            let (sin, cos) = (t * p).sin_cos();
                            re += cos;
                            im += sin;
                        }
                        row[base + k] = re / m as f64;
                        row[base + grid.len() + k] = im / m as f64;
                    }
                }
                row
            })
            .collect();
        for (a, row) in rows.into_iter().enumerate() {
            out.row_mut(c.nodes[a]).copy_from_slice(&row);
        }
    }
    out
}

pub fn graphwave(g: &Graph, cfg: &WaveletConfig) -> Embedding {
    let raw = characteristic_features(g, cfg);
    let proj = cfg.projection();
    let d = cfg.target_dim;
    let mut e = Embedding::zeros("graphwave", cfg.projection_seed, raw.rows(), d);
    for v in 0..raw.rows() {
        let x = raw.row(v);
        let y = e.row_mut(v);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, pj) in y.iter_mut().zip(&proj[i * d..(i + 1) * d]) {
                *yj += xi * pj;
            }
        }
    }
    e
}
