use proptest::prelude::*;
use sigbench::stats::{chi_square_sf, mcnemar, metrics, trimmed_mean, McNemarResult, Direction};

/// 1 - P(1/2, x/2) with P from the lower incomplete gamma power series.
fn sf_series(x: f64) -> f64 {
    let (s, z) = (0.5f64, x / 2.0);
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..10_000 {
        term *= z / (s + n as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    let gamma_half = std::f64::consts::PI.sqrt();
    1.0 - sum * z.powf(s) * (-z).exp() / gamma_half
}

#[test]
fn chi_square_matches_series_oracle() {
    for &x in &[0.01, 0.1, 0.5, 1.0, 2.0, 3.841, 6.635, 8.1, 12.0, 20.0] {
        let (a, b) = (chi_square_sf(x), sf_series(x));
        assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
    }
    assert_eq!(chi_square_sf(0.0), 1.0);
}

#[test]
fn golden_values() {
    assert!((chi_square_sf(8.1) - 0.004427).abs() < 1e-5);
    assert!((chi_square_sf(3.841) - 0.05).abs() < 5e-4);
    assert!((chi_square_sf(6.635) - 0.01).abs() < 5e-4);
    let r = McNemarResult::from_counts(5, 5);
    assert!((r.p - 0.7518).abs() < 1e-4);
}

fn binary(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, n)
}

proptest! {
    #[test]
    fn mcnemar_is_antisymmetric((a, b, t) in (1usize..60).prop_flat_map(|n| (binary(n), binary(n), binary(n)))) {
        let fwd = mcnemar(&a, &b, &t).unwrap();
        let rev = mcnemar(&b, &a, &t).unwrap();
        prop_assert_eq!((fwd.b, fwd.c), (rev.c, rev.b));
        prop_assert_eq!(fwd.chi2, rev.chi2);
        prop_assert_eq!(fwd.p, rev.p);
        let flipped = match fwd.direction {
            Direction::Improvement => Direction::Deterioration,
            Direction::Deterioration => Direction::Improvement,
            Direction::None => Direction::None,
        };
        prop_assert_eq!(rev.direction, flipped);
        prop_assert!((0.0..=1.0).contains(&fwd.p));
    }

    #[test]
    fn identical_predictions_are_not_discordant((a, t) in (1usize..60).prop_flat_map(|n| (binary(n), binary(n)))) {
        let r = mcnemar(&a, &a, &t).unwrap();
        prop_assert_eq!((r.b, r.c, r.p), (0, 0, 1.0));
        prop_assert_eq!(metrics(&a, &t, 1).unwrap().f1, metrics(&a, &t, 1).unwrap().f1);
    }

    #[test]
    fn trimmed_mean_is_bounded(v in prop::collection::vec(-10.0f64..10.0, 3..20)) {
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        let m = trimmed_mean(&v).unwrap();
        prop_assert!(m >= s[1] - 1e-12 && m <= s[s.len() - 2] + 1e-12);
    }

    #[test]
    fn survival_is_decreasing(x in 0.0f64..50.0, dx in 1e-6f64..5.0) {
        prop_assert!(chi_square_sf(x + dx) <= chi_square_sf(x));
    }
}
