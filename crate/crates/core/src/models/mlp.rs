//! Feed-forward network with a sigmoid output, trained by Adam with early
//! stopping on an internal holdout of the training rows.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, tag};

pub const MAX_EPOCHS: usize = 200;
pub const PATIENCE: usize = 10;
pub const HOLDOUT_FRACTION: f64 = 0.1;
const MIN_IMPROVEMENT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => (a > 0.0) as u8 as f64,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub lr_init: f64,
    pub activation: Activation,
    pub batch_size: usize,
    pub max_epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![100],
            alpha: 1e-4,
            lr_init: 1e-3,
            activation: Activation::Relu,
            batch_size: 200,
            max_epochs: MAX_EPOCHS,
        }
    }
}

impl MlpParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = MlpParams::default();
        let hidden = match spec.get("hidden_layer_sizes") {
            None => d.hidden,
            Some(v) => v
                .to_string()
                .trim_matches(|c| c == '(' || c == ')')
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad hidden_layer_sizes {v}"))))
                .collect::<Result<_>>()?,
        };
        let activation = match spec.string("activation", "relu")?.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => return Err(Error::Config(format!("unknown activation `{other}`"))),
        };
        Ok(MlpParams {
            hidden,
            alpha: spec.float("alpha", d.alpha)?,
            lr_init: spec.float("lr_init", d.lr_init)?,
            activation,
            batch_size: spec.int("batch_size", d.batch_size as i64)?.max(1) as usize,
            max_epochs: d.max_epochs,
        })
    }
}

/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; weights are
/// stored row-major (output-major) followed by biases, all in one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    pub epochs_run: usize,
}

impl Mlp {
    pub fn new(sizes: Vec<usize>, activation: Activation, seed: u64) -> Mlp {
        let mut rng = stream_rng(&[tag("mlp-init"), seed]);
        let mut params = Vec::new();
        let layers = sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let factor = if l + 1 == layers { 2.0 } else { 6.0 };
            let bound = (factor / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out + fan_out).map(|_| rng.random_range(-bound..bound)));
        }
        Mlp { sizes, activation, params, epochs_run: 0 }
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut k = 0;
        for l in 0..self.sizes.len() - 1 {
            let w = self.sizes[l] * self.sizes[l + 1];
            out.push((k, k + w));
            k += w + self.sizes[l + 1];
        }
        out
    }

    /// Activations of every layer for one row; the last entry is the logit.
    fn forward(&self, r: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        let mut acts = vec![r.to_vec()];
        for (l, (w0, b0)) in self.offsets().into_iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let w = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                    let z = w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + self.params[b0 + o];
                    if l + 1 < layers {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn logit(&self, r: &[f64]) -> f64 {
        self.forward(r).last().unwrap()[0]
    }

    /// Mean cross-entropy over `rows` plus `alpha |W|^2 / (2 |rows|)`; the
    /// gradient with respect to `params` is written into `grad`.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8], rows: &[usize], alpha: f64, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let offsets = self.offsets();
        let layers = offsets.len();
        let m = rows.len() as f64;
        let mut loss = 0.0;
        for &i in rows {
            let acts = self.forward(x.row(i));
            let z = acts[layers][0];
            let t = y[i] as f64;
            loss += if z > 0.0 { z + (-z).exp().ln_1p() - t * z } else { z.exp().ln_1p() - t * z };
            let mut delta = vec![(1.0 / (1.0 + (-z).exp()) - t) / m];
            for l in (0..layers).rev() {
                let (w0, b0) = offsets[l];
                let n_in = self.sizes[l];
                let input = &acts[l];
                let mut back = vec![0.0; n_in];
                for (o, &dl) in delta.iter().enumerate() {
                    let wrow = w0 + o * n_in;
                    for k in 0..n_in {
                        grad[wrow + k] += dl * input[k];
                        back[k] += dl * self.params[wrow + k];
                    }
                    grad[b0 + o] += dl;
                }
                if l > 0 {
                    for (b, a) in back.iter_mut().zip(input) {
                        *b *= self.activation.derivative(*a);
                    }
                }
                delta = back;
            }
        }
        let mut penalty = 0.0;
        for &(w0, w1) in &offsets {
            for k in w0..w1 {
                penalty += self.params[k] * self.params[k];
                grad[k] += alpha * self.params[k] / m;
            }
        }
        loss / m + 0.5 * alpha * penalty / m
    }

    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| 1.0 / (1.0 + (-self.logit(r)).exp())).collect()
    }
}

/// Stratified holdout drawn from the training rows: (fit rows, holdout rows).
fn holdout(y: &[u8], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(&[tag("mlp-holdout"), seed]);
    let (mut fit, mut hold) = (Vec::new(), Vec::new());
    for c in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * HOLDOUT_FRACTION).round() as usize).min(idx.len().saturating_sub(1));
        hold.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

pub fn fit(p: &MlpParams, x: &Matrix, y: &[u8], seed: u64) -> Mlp {
    let mut sizes = vec![x.cols()];
    sizes.extend(&p.hidden);
    sizes.push(1);
    let mut net = Mlp::new(sizes, p.activation, seed);
    let (mut train_rows, hold) = holdout(y, seed);
    let np = net.params.len();
    let (mut m1, mut m2, mut grad) = (vec![0.0; np], vec![0.0; np], vec![0.0; np]);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut rng = stream_rng(&[tag("mlp-shuffle"), seed]);
    let mut best = (f64::INFINITY, net.params.clone());
    let mut stale = 0;
    let mut scratch = vec![0.0; np];
    let batch = p.batch_size.min(train_rows.len()).max(1);
    for epoch in 0..p.max_epochs {
        train_rows.shuffle(&mut rng);
        for chunk in train_rows.chunks(batch) {
            net.loss_and_grad(x, y, chunk, p.alpha, &mut grad);
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for k in 0..np {
                m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
                net.params[k] -= p.lr_init * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
            }
        }
        net.epochs_run = epoch + 1;
        if hold.is_empty() {
            continue;
        }
        let loss = net.loss_and_grad(x, y, &hold, 0.0, &mut scratch);
        if loss < best.0 - MIN_IMPROVEMENT {
            best = (loss, net.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= PATIENCE {
                break;
            }
        }
    }
    if best.0.is_finite() {
        net.params = best.1;
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream_rng(&[7]);
        let x = Matrix::new(12, 4, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect());
        let y: Vec<u8> = (0..12).map(|i| (i % 3 == 0) as u8).collect();
        let rows: Vec<usize> = (0..12).collect();
        for act in [Activation::Tanh, Activation::Relu] {
            let mut net = Mlp::new(vec![4, 5, 3, 1], act, 3);
            net.params.iter_mut().for_each(|w| *w *= 2.0);
            let mut g = vec![0.0; net.params.len()];
            net.loss_and_grad(&x, &y, &rows, 1e-2, &mut g);
            let mut scratch = g.clone();
            for k in 0..net.params.len() {
                let h = 1e-6;
                let mut plus = net.clone();
                plus.params[k] += h;
                let mut minus = net.clone();
                minus.params[k] -= h;
                let fd = (plus.loss_and_grad(&x, &y, &rows, 1e-2, &mut scratch)
                    - minus.loss_and_grad(&x, &y, &rows, 1e-2, &mut scratch))
                    / (2.0 * h);
                let denom = fd.abs().max(g[k].abs()).max(1e-6);
                assert!((fd - g[k]).abs() / denom < 1e-4, "{act:?} param {k}: fd {fd} analytic {}", g[k]);
            }
        }
    }

    #[test]
    fn hidden_sizes_parse() {
        let spec = ModelSpec::new(super::super::Family::Mlp)
            .with("hidden_layer_sizes", super::super::ParamValue::Str("(128,64)".into()));
        assert_eq!(MlpParams::from_spec(&spec).unwrap().hidden, vec![128, 64]);
    }
}
