//! L2 or unpenalized logistic regression, solved by L-BFGS or SAGA.

use rand::Rng;

use super::optim::lbfgs;
use super::{sample_weights, Balancing, ModelSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, tag};

pub const MAX_ITER: usize = 1000;
pub const GRAD_TOL: f64 = 1e-6;
const SAGA_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Lbfgs,
    Saga,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogregParams {
    pub l2: bool,
    pub c: f64,
    pub solver: Solver,
    pub class_weights: bool,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams { l2: true, c: 1.0, solver: Solver::Lbfgs, class_weights: false }
    }
}

impl LogregParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let l2 = match spec.string("penalty", "l2")?.as_str() {
            "l2" => true,
            "none" | "None" => false,
            other => return Err(Error::Config(format!("unknown penalty `{other}`"))),
        };
        let solver = match spec.string("solver", "lbfgs")?.as_str() {
            "lbfgs" => Solver::Lbfgs,
            "saga" => Solver::Saga,
            other => return Err(Error::Config(format!("unknown solver `{other}`"))),
        };
        Ok(LogregParams {
            l2,
            c: spec.float("C", 1.0)?,
            solver,
            class_weights: spec.balancing()? == Balancing::ClassWeights,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn margin(x: &[f64], beta: &[f64]) -> f64 {
    let d = x.len();
    x.iter().zip(&beta[..d]).map(|(a, b)| a * b).sum::<f64>() + beta[d]
}

/// Training objective `(C * sum_i w_i l_i + |w|^2 / 2) / n` (the penalty and
/// C drop out without L2). `beta` is `[weights, intercept]`; the intercept is
/// never penalized. Writes the gradient into `grad`.
pub fn objective(x: &Matrix, y: &[u8], sw: &[f64], p: &LogregParams, beta: &[f64], grad: &mut [f64]) -> f64 {
    let d = x.cols();
    let n = x.rows() as f64;
    let c = if p.l2 { p.c } else { 1.0 };
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for i in 0..x.rows() {
        let r = x.row(i);
        let z = margin(r, beta);
        let t = y[i] as f64;
        loss += c * sw[i] * (softplus(z) - t * z);
        let e = c * sw[i] * (sigmoid(z) - t);
        for (g, v) in grad[..d].iter_mut().zip(r) {
            *g += e * v;
        }
        grad[d] += e;
    }
    if p.l2 {
        for j in 0..d {
            loss += 0.5 * beta[j] * beta[j];
            grad[j] += beta[j];
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    loss / n
}

pub fn fit(p: &LogregParams, x: &Matrix, y: &[u8], seed: u64) -> LogisticModel {
    fit_with_weights(p, x, y, &sample_weights(y, p.class_weights), seed)
}

/// Fits with explicit per-row loss weights.
pub fn fit_with_weights(p: &LogregParams, x: &Matrix, y: &[u8], sw: &[f64], seed: u64) -> LogisticModel {
    let d = x.cols();
    let (beta, iterations, converged) = match p.solver {
        Solver::Lbfgs => {
            let m = lbfgs(|b, g| objective(x, y, sw, p, b, g), vec![0.0; d + 1], MAX_ITER, GRAD_TOL);
            (m.x, m.iterations, m.converged)
        }
        Solver::Saga => saga(p, x, y, sw, seed),
    };
    LogisticModel { weights: beta[..d].to_vec(), intercept: beta[d], iterations, converged }
}

/// SAGA over the same objective, keeping one scalar gradient factor per row.
fn saga(p: &LogregParams, x: &Matrix, y: &[u8], sw: &[f64], seed: u64) -> (Vec<f64>, usize, bool) {
    let (n, d) = (x.rows(), x.cols());
    let c = if p.l2 { p.c } else { 1.0 };
    let lambda = if p.l2 { 1.0 / n as f64 } else { 0.0 };
    let max_sq = x.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
    let max_w = sw.iter().copied().fold(0.0, f64::max);
    let step = 1.0 / (3.0 * (0.25 * c * max_w * max_sq + lambda));
    let inv_n = 1.0 / n as f64;
    let mut beta = vec![0.0; d + 1];
    let mut memory = vec![0.0; n];
    let mut avg = vec![0.0; d + 1];
    let mut rng = stream_rng(&[tag("saga"), seed]);
    for epoch in 0..MAX_ITER {
        let before = beta.clone();
        for _ in 0..n {
            let j = rng.random_range(0..n);
            let r = x.row(j);
            let e = c * sw[j] * (sigmoid(margin(r, &beta)) - y[j] as f64);
            let delta = e - memory[j];
            memory[j] = e;
            for k in 0..d {
                beta[k] -= step * (delta * r[k] + avg[k] + lambda * beta[k]);
                avg[k] += delta * r[k] * inv_n;
            }
            beta[d] -= step * (delta + avg[d]);
            avg[d] += delta * inv_n;
        }
        let change = beta.iter().zip(&before).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        let scale = beta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if change <= SAGA_TOL * scale.max(1e-12) {
            return (beta, epoch + 1, true);
        }
    }
    (beta, MAX_ITER, false)
}

impl LogisticModel {
    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| sigmoid(r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept))
            .collect()
    }
}
