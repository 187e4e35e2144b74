//! Univariate tree-structured Parzen estimator search.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::space::{Dist, SearchSpace};
use super::{ModelSpec, ParamValue};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub budget: usize,
    pub startup: usize,
    pub gamma: f64,
    pub candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig { budget: 50, startup: 20, gamma: 0.25, candidates: 24, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, ParamValue>,
    /// `+inf` for failed trials.
    #[serde(with = "loss_repr")]
    pub loss: f64,
    pub error: Option<String>,
}

/// JSON cannot hold infinities; failed losses are written as null.
mod loss_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ModelSpec,
    #[serde(with = "loss_repr")]
    pub best_loss: f64,
    pub trials: Vec<Trial>,
}

fn to_internal(d: &Dist, v: &ParamValue) -> Option<f64> {
    let x = v.as_f64()?;
    match d {
        Dist::LogUniform { .. } => Some(x.ln()),
        _ => Some(x),
    }
}

fn bounds(d: &Dist) -> (f64, f64) {
    match *d {
        Dist::Uniform { lo, hi } | Dist::QUniform { lo, hi, .. } => (lo, hi),
        Dist::LogUniform { lo, hi } => (lo.ln(), hi.ln()),
        Dist::Choice(_) => unreachable!(),
    }
}

fn from_internal(d: &Dist, u: f64) -> ParamValue {
    match *d {
        Dist::Uniform { lo, hi } => ParamValue::Float(u.clamp(lo, hi)),
        Dist::LogUniform { lo, hi } => ParamValue::Float(u.exp().clamp(lo, hi)),
        Dist::QUniform { lo, hi, step } => {
            let v = ((u / step).round() * step).clamp(lo, hi);
            ParamValue::Int(v.round() as i64)
        }
        Dist::Choice(_) => unreachable!(),
    }
}

fn random_value(d: &Dist, rng: &mut ChaCha8Rng) -> ParamValue {
    match d {
        Dist::Choice(options) => options[rng.random_range(0..options.len())].clone(),
        _ => {
            let (lo, hi) = bounds(d);
            from_internal(d, lo + rng.random::<f64>() * (hi - lo))
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Gaussian mixture truncated to `[lo, hi]`: one component per observation plus
/// a broad prior at the midpoint, bandwidths from neighbor gaps.
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn new(obs: &[f64], lo: f64, hi: f64) -> Parzen {
        let prior_mu = 0.5 * (lo + hi);
        let width = hi - lo;
        let mut mus: Vec<f64> = obs.to_vec();
        mus.push(prior_mu);
        mus.sort_by(f64::total_cmp);
        let n = mus.len();
        let min_sigma = width / (100.0f64).min(1.0 + n as f64);
        let sigmas = (0..n)
            .map(|i| {
                if mus[i] == prior_mu && obs.is_empty() {
                    return width;
                }
                let left = if i > 0 { mus[i] - mus[i - 1] } else { mus[i] - lo };
                let right = if i + 1 < n { mus[i + 1] - mus[i] } else { hi - mus[i] };
                left.max(right).clamp(min_sigma, width)
            })
            .collect::<Vec<_>>();
        // the prior component always keeps the full width
        let mut sigmas = sigmas;
        if let Some(k) = mus.iter().position(|&m| m == prior_mu) {
            sigmas[k] = width;
        }
        Parzen { mus, sigmas, lo, hi }
    }

    fn log_density(&self, u: f64) -> f64 {
        let w = 1.0 / self.mus.len() as f64;
        let total: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .map(|(&m, &s)| {
                let mass = std_normal_cdf((self.hi - m) / s) - std_normal_cdf((self.lo - m) / s);
                let z = (u - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * mass.max(1e-300))
            })
            .sum();
        total.max(1e-300).ln()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let k = rng.random_range(0..self.mus.len());
        let (m, s) = (self.mus[k], self.sigmas[k]);
        for _ in 0..100 {
            // Box-Muller
            let (a, b): (f64, f64) = (rng.random::<f64>().max(f64::MIN_POSITIVE), rng.random());
            let u = m + s * (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos();
            if u >= self.lo && u <= self.hi {
                return u;
            }
        }
        m.clamp(self.lo, self.hi)
    }
}

fn propose(d: &Dist, good: &[&ParamValue], bad: &[&ParamValue], candidates: usize, rng: &mut ChaCha8Rng) -> ParamValue {
    match d {
        Dist::Choice(options) => {
            let k = options.len() as f64;
            let prob = |set: &[&ParamValue], o: &ParamValue| {
                (set.iter().filter(|v| **v == o).count() as f64 + 1.0) / (set.len() as f64 + k)
            };
            let pg: Vec<f64> = options.iter().map(|o| prob(good, o)).collect();
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..candidates {
                let mut r = rng.random::<f64>() * pg.iter().sum::<f64>();
                let mut idx = options.len() - 1;
                for (i, p) in pg.iter().enumerate() {
                    if r < *p {
                        idx = i;
                        break;
                    }
                    r -= p;
                }
                let score = pg[idx].ln() - prob(bad, &options[idx]).ln();
                if best.is_none_or(|b| score > b.1) {
                    best = Some((idx, score));
                }
            }
            options[best.unwrap().0].clone()
        }
        _ => {
            let (lo, hi) = bounds(d);
            let internal = |set: &[&ParamValue]| set.iter().filter_map(|v| to_internal(d, v)).collect::<Vec<_>>();
            let l = Parzen::new(&internal(good), lo, hi);
            let g = Parzen::new(&internal(bad), lo, hi);
            let mut best: Option<(ParamValue, f64)> = None;
            for _ in 0..candidates {
                let value = from_internal(d, l.sample(rng));
                let u = to_internal(d, &value).unwrap();
                let score = l.log_density(u) - g.log_density(u);
                if best.as_ref().is_none_or(|b| score > b.1) {
                    best = Some((value, score));
                }
            }
            best.unwrap().0
        }
    }
}

/// Runs exactly `cfg.budget` objective evaluations and returns the lowest-loss spec.
/// An objective error or non-finite loss marks the trial failed (`+inf`).
pub fn hpo_search(
    space: &SearchSpace,
    cfg: &TpeConfig,
    mut objective: impl FnMut(&ModelSpec) -> Result<f64>,
) -> Result<SearchResult> {
    if cfg.budget == 0 {
        return Err(Error::Config("search budget must be positive".into()));
    }
    let mut trials: Vec<Trial> = Vec::with_capacity(cfg.budget);
    for t in 0..cfg.budget {
        let mut rng = stream_rng(&[tag("tpe"), cfg.seed, t as u64]);
        let mut params = BTreeMap::new();
        if t < cfg.startup {
            for (name, d) in &space.params {
                params.insert(name.clone(), random_value(d, &mut rng));
            }
        } else {
            let mut order: Vec<usize> = (0..trials.len()).collect();
            order.sort_by(|&a, &b| trials[a].loss.total_cmp(&trials[b].loss).then(a.cmp(&b)));
            let n_good = ((cfg.gamma * trials.len() as f64).ceil() as usize).clamp(1, trials.len());
            let (good, bad) = order.split_at(n_good);
            for (name, d) in &space.params {
                let pick = |set: &[usize]| set.iter().map(|&i| &trials[i].params[name]).collect::<Vec<_>>();
                params.insert(name.clone(), propose(d, &pick(good), &pick(bad), cfg.candidates, &mut rng));
            }
        }
        let spec = ModelSpec { family: space.family, params: params.clone() };
        let (loss, error) = match objective(&spec) {
            Ok(l) if l.is_finite() => (l, None),
            Ok(l) => (f64::INFINITY, Some(format!("non-finite loss {l}"))),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        trials.push(Trial { index: t, params, loss, error });
    }
    let best = trials
        .iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss).then(a.index.cmp(&b.index)))
        .unwrap();
    Ok(SearchResult {
        best: ModelSpec { family: space.family, params: best.params.clone() },
        best_loss: best.loss,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;

    fn quadratic_space() -> SearchSpace {
        SearchSpace { family: Family::LinearSvm, params: vec![("x".into(), Dist::Uniform { lo: -5.0, hi: 5.0 })] }
    }

    fn x_of(s: &ModelSpec) -> f64 {
        s.params["x"].as_f64().unwrap()
    }

    #[test]
    fn budget_is_exact_and_seeded() {
        let mut calls = 0;
        let r = hpo_search(&quadratic_space(), &TpeConfig::default(), |s| {
            calls += 1;
            Ok(x_of(s).powi(2))
        })
        .unwrap();
        assert_eq!(calls, 50);
        assert_eq!(r.trials.len(), 50);
        let again = hpo_search(&quadratic_space(), &TpeConfig::default(), |s| Ok(x_of(s).powi(2))).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let r = hpo_search(&quadratic_space(), &TpeConfig { budget: 30, ..TpeConfig::default() }, |s| {
            if x_of(s) < 0.0 {
                Err(Error::invalid("boom"))
            } else {
                Ok(x_of(s))
            }
        })
        .unwrap();
        assert!(r.trials.iter().any(|t| t.loss.is_infinite() && t.error.is_some()));
        assert!(r.best_loss.is_finite() && x_of(&r.best) >= 0.0);
        let json = serde_json::to_string(&r).unwrap();
        let back: SearchResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.trials.len(), 30);
    }
}
