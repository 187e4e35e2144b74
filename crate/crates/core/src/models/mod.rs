//! Native classifier families and the TPE hyperparameter search.

pub mod gbt;
pub mod gnb;
pub mod logreg;
pub mod mlp;
pub mod optim;
pub mod space;
pub mod svm;
pub mod tpe;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::{PcaTarget, PrepConfig, ScalerMode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use space::{search_space, Dist, SearchSpace};
pub use tpe::{hpo_search, SearchResult, TpeConfig, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logreg,
    Gnb,
    LinearSvm,
    RandomForest,
    Gbt,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Logreg,
        Family::Gnb,
        Family::LinearSvm,
        Family::RandomForest,
        Family::Gbt,
        Family::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logreg => "logreg",
            Family::Gnb => "gnb",
            Family::LinearSvm => "linear_svm",
            Family::RandomForest => "random_forest",
            Family::Gbt => "gbt",
            Family::Mlp => "mlp",
        }
    }

    /// Scaler applied when the spec does not choose one.
    pub fn default_scaler(self) -> Option<ScalerMode> {
        match self {
            Family::Logreg | Family::LinearSvm | Family::Mlp | Family::Gnb => Some(ScalerMode::Standard),
            Family::RandomForest | Family::Gbt => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(x) => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Null => f.write_str("None"),
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    None,
    ClassWeights,
    Oversampling,
    ClassPrior,
}

/// A classifier family with concrete hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub params: BTreeMap<String, ParamValue>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        ModelSpec { family, params: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.params.get(name)
    }

    pub fn float(&self, name: &str, default: f64) -> Result<f64> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.bad(name, v)),
        }
    }

    pub fn int(&self, name: &str, default: i64) -> Result<i64> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Int(i)) => Ok(*i),
            Some(ParamValue::Float(x)) if x.fract() == 0.0 => Ok(*x as i64),
            Some(v) => Err(self.bad(name, v)),
        }
    }

    /// Integer or `None` (missing counts as `default`).
    pub fn opt_int(&self, name: &str, default: Option<i64>) -> Result<Option<i64>> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Null) => Ok(None),
            Some(_) => self.int(name, 0).map(Some),
        }
    }

    pub fn string(&self, name: &str, default: &str) -> Result<String> {
        match self.get(name) {
            None => Ok(default.to_string()),
            Some(ParamValue::Str(s)) => Ok(s.clone()),
            Some(ParamValue::Null) => Ok("none".to_string()),
            Some(v) => Err(self.bad(name, v)),
        }
    }

    pub fn flag(&self, name: &str, default: bool) -> Result<bool> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(v) => Err(self.bad(name, v)),
        }
    }

    fn bad(&self, name: &str, v: &ParamValue) -> Error {
        Error::Config(format!("{}: parameter `{name}` has unusable value {v}", self.family))
    }

    pub fn balancing(&self) -> Result<Balancing> {
        match self.string("balancing_strategy", "none")?.as_str() {
            "none" => Ok(Balancing::None),
            "class_weights" => Ok(Balancing::ClassWeights),
            "oversampling" => Ok(Balancing::Oversampling),
            "class_prior" => Ok(Balancing::ClassPrior),
            other => Err(Error::Config(format!("unknown balancing strategy `{other}`"))),
        }
    }

    /// Preprocessing implied by the spec: scaler, embedding PCA, oversampling.
    pub fn prep_config(&self, seed: u64) -> Result<PrepConfig> {
        let scaler = match self.get("scaler") {
            Some(ParamValue::Str(s)) if s == "standard" => Some(ScalerMode::Standard),
            Some(ParamValue::Str(s)) if s == "minmax" => Some(ScalerMode::Minmax),
            Some(v) => return Err(self.bad("scaler", v)),
            None => self.family.default_scaler(),
        };
        let pca = if self.flag("use_emb_pca", false)? {
            Some(match self.get("emb_pca_n") {
                Some(ParamValue::Int(k)) => PcaTarget::Components(*k as usize),
                Some(ParamValue::Float(f)) if *f < 1.0 => PcaTarget::Variance(*f),
                Some(ParamValue::Float(f)) => PcaTarget::Components(*f as usize),
                None => PcaTarget::Variance(0.95),
                Some(v) => return Err(self.bad("emb_pca_n", v)),
            })
        } else {
            None
        };
        let oversample = match self.balancing()? {
            Balancing::Oversampling => Some(self.float("oversample_ratio", 1.0)?),
            _ => None,
        };
        Ok(PrepConfig { scaler, pca, oversample, seed })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Balanced class weights `n / (2 n_c)` when requested, else ones.
pub(crate) fn sample_weights(y: &[u8], balanced: bool) -> Vec<f64> {
    if !balanced {
        return vec![1.0; y.len()];
    }
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let neg = y.len() as f64 - pos;
    let n = y.len() as f64;
    y.iter().map(|&v| if v == 1 { n / (2.0 * pos) } else { n / (2.0 * neg) }).collect()
}

#[derive(Debug, Clone)]
enum Fitted {
    Logreg(logreg::LogisticModel),
    Gnb(gnb::GaussianNb),
    Svm(svm::LinearSvm),
    Forest(tree::RandomForest),
    Gbt(gbt::Booster),
    Mlp(mlp::Mlp),
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub family: Family,
    pub seed: u64,
    n_cols: usize,
    fitted: Fitted,
}

fn check_inputs(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.rows(), found: y.len() });
    }
    if !x.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid("training set contains a single class"));
    }
    Ok(())
}

/// Fits the spec's family on already preprocessed rows.
pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u8], seed: u64) -> Result<TrainedModel> {
    check_inputs(x, y)?;
    let fitted = match spec.family {
        Family::Logreg => Fitted::Logreg(logreg::fit(&logreg::LogregParams::from_spec(spec)?, x, y, seed)),
        Family::Gnb => Fitted::Gnb(gnb::fit(&gnb::GnbParams::from_spec(spec)?, x, y)),
        Family::LinearSvm => Fitted::Svm(svm::fit(&svm::SvmParams::from_spec(spec)?, x, y, seed)),
        Family::RandomForest => Fitted::Forest(tree::fit_forest(&tree::ForestParams::from_spec(spec)?, x, y, seed)),
        Family::Gbt => Fitted::Gbt(gbt::fit(&gbt::GbtParams::from_spec(spec)?, x, y, seed)),
        Family::Mlp => Fitted::Mlp(mlp::fit(&mlp::MlpParams::from_spec(spec)?, x, y, seed)),
    };
    Ok(TrainedModel { family: spec.family, seed, n_cols: x.cols(), fitted })
}

impl TrainedModel {
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// `[P(licit), P(illicit)]` per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<[f64; 2]>> {
        if x.cols() != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_cols, found: x.cols() });
        }
        let p: Vec<f64> = match &self.fitted {
            Fitted::Logreg(m) => m.positive_proba(x),
            Fitted::Gnb(m) => m.positive_proba(x),
            Fitted::Svm(m) => m.positive_proba(x),
            Fitted::Forest(m) => m.positive_proba(x),
            Fitted::Gbt(m) => m.positive_proba(x),
            Fitted::Mlp(m) => m.positive_proba(x),
        };
        Ok(p.into_iter().map(|q| {
            let q = if q.is_finite() { q.clamp(0.0, 1.0) } else { 0.5 };
            [1.0 - q, q]
        }).collect())
    }

    /// Argmax labels; ties go to the negative class.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.iter().map(|p| (p[1] > p[0]) as u8).collect())
    }
}

pub const PROBA_CLIP: f64 = 1e-12;

/// Mean negative log-likelihood of the true class, probabilities clipped.
pub fn cross_entropy(proba: &[[f64; 2]], y: &[u8]) -> f64 {
    let total: f64 = proba
        .iter()
        .zip(y)
        .map(|(p, &t)| -p[t as usize].clamp(PROBA_CLIP, 1.0 - PROBA_CLIP).ln())
        .sum();
    total / y.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_cases() {
        assert!((cross_entropy(&[[0.5, 0.5]; 4], &[0, 1, 0, 1]) - std::f64::consts::LN_2).abs() < 1e-15);
        let perfect = cross_entropy(&[[0.0, 1.0], [1.0, 0.0]], &[1, 0]);
        assert!(perfect > 0.0 && perfect < 2e-12);
        let p = [[0.2, 0.8], [0.6, 0.4], [0.9, 0.1]];
        let manual = -(0.8f64.ln() + 0.6f64.ln() + 0.1f64.ln()) / 3.0;
        assert!((cross_entropy(&p, &[1, 0, 1]) - manual).abs() < 1e-12);
    }

    #[test]
    fn spec_accessors_and_prep() {
        let spec = ModelSpec::new(Family::Logreg)
            .with("C", ParamValue::Float(0.5))
            .with("use_emb_pca", ParamValue::Bool(true))
            .with("emb_pca_n", ParamValue::Float(0.95))
            .with("balancing_strategy", ParamValue::Str("oversampling".into()));
        let prep = spec.prep_config(3).unwrap();
        assert_eq!(prep.pca, Some(PcaTarget::Variance(0.95)));
        assert_eq!(prep.oversample, Some(1.0));
        assert_eq!(prep.scaler, Some(ScalerMode::Standard));
        assert_eq!(spec.float("C", 1.0).unwrap(), 0.5);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn balanced_weights() {
        let w = sample_weights(&[1, 0, 0, 0], true);
        assert_eq!(w, vec![2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
    }
}
