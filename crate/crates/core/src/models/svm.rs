//! Linear hinge-loss SVM trained by Pegasos SGD, with a logistic link over
//! the margin for probabilities.

use rand::Rng;

use super::{sample_weights, Balancing, ModelSpec};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::{stream_rng, tag};

pub const EPOCHS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub class_weights: bool,
}

impl SvmParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Ok(SvmParams {
            c: spec.float("SVC_C", spec.float("C", 1.0)?)?,
            class_weights: spec.balancing()? == Balancing::ClassWeights,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Logistic link `sigmoid(a * margin + b)`.
    pub link: (f64, f64),
}

fn margin(r: &[f64], w: &[f64], b: f64) -> f64 {
    r.iter().zip(w).map(|(x, v)| x * v).sum::<f64>() + b
}

/// Minimizes `|w|^2 / 2 + C * sum_i s_i * hinge_i` by averaged Pegasos steps
/// on the equivalent `lambda = 1 / (C n)` objective.
pub fn fit(p: &SvmParams, x: &Matrix, y: &[u8], seed: u64) -> LinearSvm {
    let (n, d) = (x.rows(), x.cols());
    let sw = sample_weights(y, p.class_weights);
    let lambda = 1.0 / (p.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = stream_rng(&[tag("svm"), seed]);
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut w_avg, mut b_avg, mut averaged) = (vec![0.0; d], 0.0, 0usize);
    let total = EPOCHS * n;
    // the offset keeps early steps bounded when lambda is tiny
    let t0 = 1.0 / lambda;
    for t in 0..total {
        let i = rng.random_range(0..n);
        let r = x.row(i);
        let target = if y[i] == 1 { 1.0 } else { -1.0 };
        let eta = 1.0 / (lambda * (t0 + t as f64 + 1.0));
        let violated = target * margin(r, &w, b) < 1.0;
        let shrink = 1.0 - eta * lambda;
        w.iter_mut().for_each(|v| *v *= shrink);
        if violated {
            let g = eta * sw[i] * target;
            for (v, xv) in w.iter_mut().zip(r) {
                *v += g * xv;
            }
            b += g;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        if t >= total / 2 {
            averaged += 1;
            let k = 1.0 / averaged as f64;
            for (a, v) in w_avg.iter_mut().zip(&w) {
                *a += (v - *a) * k;
            }
            b_avg += (b - b_avg) * k;
        }
    }
    let margins: Vec<f64> = x.iter_rows().map(|r| margin(r, &w_avg, b_avg)).collect();
    let link = fit_link(&margins, y);
    LinearSvm { weights: w_avg, intercept: b_avg, link }
}

/// Two-parameter logistic regression of labels on margins (Newton's method,
/// with Platt's smoothed targets).
pub fn fit_link(margins: &[f64], y: &[u8]) -> (f64, f64) {
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let neg = y.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    let targets: Vec<f64> = y.iter().map(|&v| if v == 1 { hi } else { lo }).collect();
    let (mut a, mut b) = (1.0, ((pos + 1.0) / (neg + 1.0)).ln());
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&m, &t) in margins.iter().zip(&targets) {
            let q = 1.0 / (1.0 + (-(a * m + b)).exp());
            let e = q - t;
            let w = q * (1.0 - q);
            ga += e * m;
            gb += e;
            haa += w * m * m;
            hab += w * m;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        a -= da;
        b -= db;
        if da.abs() + db.abs() < 1e-10 {
            break;
        }
    }
    (a, b)
}

impl LinearSvm {
    pub fn positive_proba(&self, x: &Matrix) -> Vec<f64> {
        let (a, b) = self.link;
        x.iter_rows()
            .map(|r| 1.0 / (1.0 + (-(a * margin(r, &self.weights, self.intercept) + b)).exp()))
            .collect()
    }
}
