use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sigbench::models::logreg::{self, LogisticModel, LogregParams, Solver};
use sigbench::models::space::Dist;
use sigbench::models::tree::{self, ForestParams};
use sigbench::models::{hpo_search, search_space, train, Family, ModelSpec, ParamValue, SearchSpace, TpeConfig};
use sigbench::Matrix;

fn blobs(n: usize, gap: f64, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut data = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = (i % 2) as u8;
        let s = if c == 1 { gap } else { -gap };
        data.push(s + noise.sample(&mut rng));
        data.push(s + noise.sample(&mut rng));
        y.push(c);
    }
    (Matrix::new(n, 2, data), y)
}

fn accuracy(pred: &[u8], y: &[u8]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

#[test]
fn logreg_separates_blobs_with_both_solvers() {
    let (x, y) = blobs(200, 3.0, 1);
    for solver in ["lbfgs", "saga"] {
        let spec = ModelSpec::new(Family::Logreg).with("solver", ParamValue::Str(solver.into()));
        let m = train(&spec, &x, &y, 1).unwrap();
        assert_eq!(accuracy(&m.predict(&x).unwrap(), &y), 1.0, "{solver}");
    }
}

#[test]
fn saga_and_lbfgs_agree() {
    let (x, y) = blobs(300, 0.6, 4);
    let base = LogregParams { c: 0.5, ..LogregParams::default() };
    let a = logreg::fit(&base, &x, &y, 1);
    let b = logreg::fit(&LogregParams { solver: Solver::Saga, ..base }, &x, &y, 1);
    for (u, v) in a.weights.iter().zip(&b.weights) {
        assert!((u - v).abs() < 1e-2, "{:?} vs {:?}", a.weights, b.weights);
    }
}

#[test]
fn logreg_gradient_matches_finite_differences_at_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for problem in 0..5 {
        let x = Matrix::new(20, 5, (0..100).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<u8> = (0..20).map(|i| ((i + problem) % 3 == 0) as u8).collect();
        let p = LogregParams { c: 0.7, ..LogregParams::default() };
        let m = logreg::fit(&p, &x, &y, 0);
        assert!(m.converged);
        let sw = vec![1.0; 20];
        let mut beta = m.weights.clone();
        beta.push(m.intercept);
        // probe a point near the optimum where the gradient is not negligible
        beta.iter_mut().enumerate().for_each(|(k, b)| *b += 0.1 * (k as f64 - 2.0));
        let mut g = vec![0.0; 6];
        logreg::objective(&x, &y, &sw, &p, &beta, &mut g);
        let mut scratch = vec![0.0; 6];
        for k in 0..6 {
            let h = 1e-6;
            let mut up = beta.clone();
            up[k] += h;
            let mut down = beta.clone();
            down[k] -= h;
            let fd = (logreg::objective(&x, &y, &sw, &p, &up, &mut scratch)
                - logreg::objective(&x, &y, &sw, &p, &down, &mut scratch))
                / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(g[k].abs()).max(1e-3), "{k}: {fd} vs {}", g[k]);
        }
        // and the returned optimum is stationary
        let mut beta = m.weights.clone();
        beta.push(m.intercept);
        logreg::objective(&x, &y, &sw, &p, &beta, &mut g);
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }
}

#[test]
fn zero_weight_logreg_is_uninformative() {
    let m = LogisticModel { weights: vec![0.0; 3], intercept: 0.0, iterations: 0, converged: true };
    let x = Matrix::new(2, 3, vec![1.0, -4.0, 2.0, 9.0, 0.0, 0.0]);
    assert!(m.positive_proba(&x).iter().all(|&p| p == 0.5));
}

#[test]
fn gaussian_nb_boundary_is_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let n = 10_000;
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let data: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 } + unit.sample(&mut rng)).collect();
    let x = Matrix::new(n, 1, data);
    let m = train(&ModelSpec::new(Family::Gnb), &x, &y, 0).unwrap();
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..60 {
        let mid = (lo + hi) / 2.0;
        let p = m.predict_proba(&Matrix::new(1, 1, vec![mid])).unwrap()[0][1];
        if p < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!(lo.abs() < 0.05, "boundary at {lo}");
}

fn every_family_spec() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new(Family::Logreg),
        ModelSpec::new(Family::Gnb),
        ModelSpec::new(Family::LinearSvm),
        ModelSpec::new(Family::RandomForest).with("n_estimators", ParamValue::Int(20)),
        ModelSpec::new(Family::Gbt).with("n_estimators", ParamValue::Int(20)),
        ModelSpec::new(Family::Mlp).with("hidden_layer_sizes", ParamValue::Str("16".into())),
    ]
}

#[test]
fn probabilities_are_consistent_for_all_families() {
    let (x, y) = blobs(120, 0.8, 5);
    for spec in every_family_spec() {
        let m = train(&spec, &x, &y, 2).unwrap();
        let proba = m.predict_proba(&x).unwrap();
        let pred = m.predict(&x).unwrap();
        for (p, &l) in proba.iter().zip(&pred) {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(l, (p[1] > p[0]) as u8);
        }
        assert!(accuracy(&pred, &y) > 0.75, "{spec}");
        let again = train(&spec, &x, &y, 2).unwrap().predict_proba(&x).unwrap();
        assert_eq!(proba, again, "{spec} is not deterministic");
        assert!(m.predict(&Matrix::zeros(1, 3)).is_err());
    }
}

#[test]
fn bad_training_inputs_are_rejected() {
    let x = Matrix::new(3, 1, vec![0.0, 1.0, f64::NAN]);
    assert!(train(&ModelSpec::new(Family::Logreg), &x, &[0, 1, 0], 0).is_err());
    let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]);
    assert!(train(&ModelSpec::new(Family::Logreg), &x, &[1, 1, 1], 0).is_err());
}

#[test]
fn uniform_class_weights_do_not_change_predictions() {
    let (x, y) = blobs(150, 0.5, 8);
    let p = ForestParams { n_estimators: 15, ..ForestParams::default() };
    let base = tree::fit_forest(&p, &x, &y, 4).positive_proba(&x);
    for w in [0.5, 2.0, 4.0] {
        let scaled = tree::fit_forest_with_weights(&p, &x, &y, &vec![w; 150], 4).positive_proba(&x);
        assert_eq!(base, scaled);
    }
    let lp = LogregParams { l2: false, ..LogregParams::default() };
    let a = logreg::fit(&lp, &x, &y, 0);
    let b = logreg::fit_with_weights(&lp, &x, &y, &vec![3.0; 150], 0);
    let argmax = |m: &LogisticModel| m.positive_proba(&x).iter().map(|&p| p > 0.5).collect::<Vec<_>>();
    assert_eq!(argmax(&a), argmax(&b));
}

#[test]
fn forest_is_seed_deterministic() {
    let (x, y) = blobs(100, 0.5, 9);
    let spec = ModelSpec::new(Family::RandomForest).with("n_estimators", ParamValue::Int(30));
    let a = train(&spec, &x, &y, 7).unwrap().predict(&x).unwrap();
    let b = train(&spec, &x, &y, 7).unwrap().predict(&x).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tpe_finds_quadratic_minimum() {
    let space = SearchSpace { family: Family::LinearSvm, params: vec![("x".into(), Dist::Uniform { lo: -5.0, hi: 5.0 })] };
    let run = |cfg: TpeConfig| {
        hpo_search(&space, &cfg, |s| Ok(s.params["x"].as_f64().unwrap().powi(2))).unwrap().best_loss.sqrt()
    };
    let mut tpe = Vec::new();
    let mut random = Vec::new();
    for seed in 0..100 {
        tpe.push(run(TpeConfig { seed, ..TpeConfig::default() }));
        random.push(run(TpeConfig { seed, startup: 50, ..TpeConfig::default() }));
    }
    let hits = tpe.iter().filter(|&&v| v < 0.5).count();
    assert!(hits >= 95, "{hits} of 100");
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[49] + v[50]) / 2.0
    };
    let (mt, mr) = (median(&mut tpe), median(&mut random));
    assert!(mt <= mr, "tpe median {mt} random median {mr}");
}

#[test]
fn searched_specs_stay_in_domain() {
    let (x, y) = blobs(80, 0.8, 2);
    for family in [Family::Gnb, Family::LinearSvm] {
        let space = search_space(family);
        let cfg = TpeConfig { budget: 25, ..TpeConfig::default() };
        let r = hpo_search(&space, &cfg, |spec| {
            assert!(space.contains(spec), "{spec}");
            let m = train(spec, &x, &y, 42)?;
            Ok(sigbench::models::cross_entropy(&m.predict_proba(&x)?, &y))
        })
        .unwrap();
        assert!(space.contains(&r.best));
    }
}
