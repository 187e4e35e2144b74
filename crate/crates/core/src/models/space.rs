//! Hyperparameter search domains per classifier family.

use serde::{Deserialize, Serialize};

use super::{Family, ModelSpec, ParamValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Choice(Vec<ParamValue>),
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    /// Uniform rounded to multiples of `step`, yielding integers.
    QUniform { lo: f64, hi: f64, step: f64 },
}

impl Dist {
    pub fn contains(&self, v: &ParamValue) -> bool {
        match self {
            Dist::Choice(options) => options.contains(v),
            Dist::Uniform { lo, hi } | Dist::LogUniform { lo, hi } => v.as_f64().is_some_and(|x| x >= *lo && x <= *hi),
            Dist::QUniform { lo, hi, step } => v.as_f64().is_some_and(|x| {
                let k = (x - lo) / step;
                x >= *lo && x <= *hi && (k - k.round()).abs() < 1e-9
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub family: Family,
    pub params: Vec<(String, Dist)>,
}

impl SearchSpace {
    /// Every parameter of `spec` is in the space and lies inside its domain.
    pub fn contains(&self, spec: &ModelSpec) -> bool {
        spec.family == self.family
            && spec.params.iter().all(|(k, v)| self.params.iter().any(|(name, d)| name == k && d.contains(v)))
    }
}

fn s(v: &str) -> ParamValue {
    ParamValue::Str(v.to_string())
}

fn choice(values: &[&str]) -> Dist {
    Dist::Choice(values.iter().map(|v| s(v)).collect())
}

fn ints(values: &[i64]) -> Vec<ParamValue> {
    values.iter().map(|&v| ParamValue::Int(v)).collect()
}

pub fn search_space(family: Family) -> SearchSpace {
    let p = |name: &str, d: Dist| (name.to_string(), d);
    let log = |lo, hi| Dist::LogUniform { lo, hi };
    let q = |lo, hi, step| Dist::QUniform { lo, hi, step };
    let params = match family {
        Family::Logreg => vec![
            p("penalty", Dist::Choice(vec![s("l2"), ParamValue::Null])),
            p("C", log(1e-3, 10.0)),
            p("solver", choice(&["lbfgs", "saga"])),
            p("balancing_strategy", choice(&["none", "oversampling", "class_weights"])),
            p("use_emb_pca", Dist::Choice(vec![ParamValue::Bool(false), ParamValue::Bool(true)])),
            p("emb_pca_n", Dist::Choice([ints(&[16, 32, 48, 64]), vec![ParamValue::Float(0.95)]].concat())),
        ],
        Family::RandomForest => vec![
            p("n_estimators", q(100.0, 600.0, 25.0)),
            p("max_depth", Dist::Choice([vec![ParamValue::Null], ints(&[5, 8, 12, 16, 20, 30, 40])].concat())),
            p("min_samples_split", q(2.0, 10.0, 1.0)),
            p("min_samples_leaf", q(1.0, 5.0, 1.0)),
            p("max_features", Dist::Choice(vec![s("sqrt"), s("log2"), ParamValue::Null])),
            p("balancing_strategy", choice(&["none", "oversampling", "class_weights"])),
        ],
        Family::LinearSvm => vec![p("SVC_C", log(1e-3, 1e2))],
        Family::Gbt => vec![
            p("n_estimators", q(50.0, 500.0, 25.0)),
            p("max_depth", q(2.0, 8.0, 1.0)),
            p("learning_rate", log(0.01, 0.3)),
            p("subsample", Dist::Uniform { lo: 0.6, hi: 1.0 }),
            p("colsample_bytree", Dist::Uniform { lo: 0.6, hi: 1.0 }),
            p("min_child_weight", log(0.1, 10.0)),
            p("gamma", log(1e-3, 1.0)),
            p("reg_alpha", log(1e-6, 1.0)),
            p("reg_lambda", log(1e-3, 10.0)),
            p("balancing_strategy", choice(&["none", "oversampling"])),
        ],
        Family::Mlp => vec![
            p("hidden_layer_sizes", choice(&["64", "128", "256", "64,32", "128,64", "128,128", "256,128"])),
            p("alpha", log(1e-6, 1e-2)),
            p("lr_init", log(1e-4, 5e-2)),
            p("activation", choice(&["relu", "tanh"])),
            p("batch_size", Dist::Choice(ints(&[64, 128, 256]))),
            p("balancing_strategy", choice(&["none", "oversampling"])),
        ],
        Family::Gnb => vec![
            p("var_smoothing", log(1e-6, 1e-1)),
            p("balancing_strategy", choice(&["none", "oversampling", "class_prior"])),
            p("oversample_ratio", Dist::Uniform { lo: 0.5, hi: 1.0 }),
            p("scaler", choice(&["standard", "minmax"])),
        ],
    };
    SearchSpace { family, params }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domains() {
        let rf = search_space(Family::RandomForest);
        let spec = ModelSpec::new(Family::RandomForest)
            .with("n_estimators", ParamValue::Int(125))
            .with("max_depth", ParamValue::Null);
        assert!(rf.contains(&spec));
        assert!(!rf.contains(&spec.clone().with("n_estimators", ParamValue::Int(130))));
        assert!(!rf.contains(&spec.with("C", ParamValue::Float(1.0))));
        let lr = search_space(Family::Logreg);
        assert!(lr.contains(&ModelSpec::new(Family::Logreg).with("C", ParamValue::Float(10.0))));
        assert!(!lr.contains(&ModelSpec::new(Family::Logreg).with("C", ParamValue::Float(10.5))));
    }
}
