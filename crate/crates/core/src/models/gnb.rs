//! Gaussian naive Bayes.

use super::{Balancing, ModelSpec};
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnbParams {
    pub var_smoothing: f64,
    /// Equal class priors instead of empirical frequencies.
    pub uniform_prior: bool,
}

impl GnbParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Ok(GnbParams {
            var_smoothing: spec.float("var_smoothing", 1e-9)?,
            uniform_prior: spec.balancing()? == Balancing::ClassPrior,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
    pub log_prior: [f64; 2],
}

fn moments<'a>(rows: impl Iterator<Item = &'a [f64]>, d: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let (mut sum, mut sq, mut n) = (vec![0.0; d], vec![0.0; d], 0usize);
    let rows: Vec<&[f64]> = rows.collect();
    for r in &rows {
        for j in 0..d {
            sum[j] += r[j];
        }
        n += 1;
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1) as f64).collect();
    for r in &rows {
        for j in 0..d {
            sq[j] += (r[j] - mean[j]).powi(2);
        }
    }
    (mean, sq.iter().map(|s| s / n.max(1) as f64).collect(), n)
}

pub fn fit(p: &GnbParams, x: &Matrix, y: &[u8]) -> GaussianNb {
    let d = x.cols();
    let (_, all_var, _) = moments(x.iter_rows(), d);
    let eps = p.var_smoothing * all_var.iter().copied().fold(0.0, f64::max);
    let eps = if eps > 0.0 { eps } else { p.var_smoothing.max(1e-300) };
    let mut out = GaussianNb { mean: [vec![], vec![]], var: [vec![], vec![]], log_prior: [0.0; 2] };
    for c in 0..2u8 {
        let (m, v, n) = moments(x.iter_rows().zip(y).filter(|(_, &t)| t == c).map(|(r, _)| r), d);
        out.mean[c as usize] = m;
        out.var[c as usize] = v.iter().map(|v| v + eps).collect();
        out.log_prior[c as usize] = if p.uniform_prior { 0.5f64.ln() } else { (n as f64 / y.len() as f64).ln() };
    }
    out
}

impl GaussianNb {
    fn joint_log_likelihood(&self, r: &[f64], c: usize) -> f64 {
        let mut s = self.log_prior[c];
        for ((x, m), v) in r.iter().zip(&self.mean[c]).zip(&self.var[c]) {
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
        }
        s
    }

    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                let (l0, l1) = (self.joint_log_likelihood(r, 0), self.joint_log_likelihood(r, 1));
                1.0 / (1.0 + (l0 - l1).exp())
            })
            .collect()
    }
}
