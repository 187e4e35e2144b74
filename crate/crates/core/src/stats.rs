//! Metrics, trimmed aggregation, and paired McNemar testing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance threshold for McNemar p-values (inclusive).
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Confusion-matrix metrics with `positive` as the positive class.
pub fn metrics(pred: &[u8], truth: &[u8], positive: u8) -> Result<MetricBundle> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: pred.len() });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(MetricBundle { f1, precision, recall, tp, fp, fn_, tn })
}

/// Indices left after dropping the first minimum and the first maximum.
fn trimmed_set(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() < 3 {
        return Err(Error::invalid(format!("trimmed aggregation needs at least 3 scores, got {}", scores.len())));
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let lo = (0..scores.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
    let hi = (0..scores.len())
        .filter(|&i| i != lo)
        .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
        .unwrap();
    Ok(scores.iter().enumerate().filter(|&(i, _)| i != lo && i != hi).map(|(_, &x)| x).collect())
}

pub fn trimmed_mean(scores: &[f64]) -> Result<f64> {
    let kept = trimmed_set(scores)?;
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Sample standard deviation over the same trimmed set (0 when one value remains).
pub fn trimmed_std(scores: &[f64]) -> Result<f64> {
    let kept = trimmed_set(scores)?;
    if kept.len() < 2 {
        return Ok(0.0);
    }
    let m = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok((kept.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (kept.len() - 1) as f64).sqrt())
}

pub fn delta_f1(trim_aug: f64, trim_base: f64) -> f64 {
    trim_aug - trim_base
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Improvement,
    Deterioration,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Baseline correct, augmented wrong.
    pub b: usize,
    /// Baseline wrong, augmented correct.
    pub c: usize,
    pub chi2: f64,
    pub p: f64,
    pub direction: Direction,
}

impl McNemarResult {
    pub fn from_counts(b: usize, c: usize) -> Self {
        let direction = match c.cmp(&b) {
            std::cmp::Ordering::Greater => Direction::Improvement,
            std::cmp::Ordering::Less => Direction::Deterioration,
            std::cmp::Ordering::Equal => Direction::None,
        };
        if b + c == 0 {
            return McNemarResult { b, c, chi2: 0.0, p: 1.0, direction };
        }
        let d = (b as f64 - c as f64).abs() - 1.0;
        let chi2 = d * d / (b + c) as f64;
        McNemarResult { b, c, chi2, p: chi_square_sf(chi2), direction }
    }

    pub fn significant(&self) -> bool {
        self.p <= ALPHA
    }
}

/// Continuity-corrected McNemar test over paired predictions.
pub fn mcnemar(pred_base: &[u8], pred_aug: &[u8], truth: &[u8]) -> Result<McNemarResult> {
    if pred_base.len() != truth.len() || pred_aug.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: pred_base.len().max(pred_aug.len()) });
    }
    let (mut b, mut c) = (0, 0);
    for ((&pb, &pa), &t) in pred_base.iter().zip(pred_aug).zip(truth) {
        match (pb == t, pa == t) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(McNemarResult::from_counts(b, c))
}

/// Survival function of the chi-square distribution with one degree of freedom.
pub fn chi_square_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((x / 2.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub n_better: usize,
    pub n_worse: usize,
}

pub fn significance_counts(results: &[McNemarResult]) -> SignificanceSummary {
    let mut s = SignificanceSummary::default();
    for r in results.iter().filter(|r| r.significant()) {
        match r.direction {
            Direction::Improvement => s.n_better += 1,
            Direction::Deterioration => s.n_worse += 1,
            Direction::None => {}
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_arithmetic() {
        let truth = [1, 1, 1, 0, 0, 0];
        let pred = [1, 1, 0, 1, 0, 0];
        let m = metrics(&pred, &truth, 1).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 2));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15 && (m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(metrics(&truth, &truth, 1).unwrap().f1, 1.0);
        let none = metrics(&[0, 0, 0], &[1, 0, 0], 1).unwrap();
        assert_eq!((none.precision, none.f1), (0.0, 0.0));
        assert!(metrics(&[1], &[1, 0], 1).is_err());
    }

    #[test]
    fn trimmed_mean_drops_one_extreme_each() {
        assert!((trimmed_mean(&[0.5, 0.1, 0.3, 0.4, 0.2]).unwrap() - 0.3).abs() < 1e-15);
        assert!((trimmed_mean(&[0.7; 10]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(trimmed_mean(&[0.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(trimmed_mean(&[0.1, 0.2]).is_err());
        assert!(trimmed_std(&[0.7; 10]).unwrap() < 1e-15);
    }

    #[test]
    fn mcnemar_cases() {
        let r = McNemarResult::from_counts(10, 0);
        assert!((r.chi2 - 8.1).abs() < 1e-12);
        assert_eq!(r.direction, Direction::Deterioration);
        let r = McNemarResult::from_counts(5, 5);
        assert!((r.chi2 - 0.1).abs() < 1e-12 && !r.significant());
        let r = mcnemar(&[1, 0], &[1, 0], &[1, 1]).unwrap();
        assert_eq!((r.b, r.c, r.p, r.direction), (0, 0, 1.0, Direction::None));
    }

    #[test]
    fn counts_significant_directions() {
        let mut v = vec![McNemarResult::from_counts(0, 12); 3];
        v.push(McNemarResult::from_counts(15, 1));
        v.push(McNemarResult::from_counts(4, 6));
        v.extend(vec![McNemarResult::from_counts(0, 0); 5]);
        assert_eq!(significance_counts(&v), SignificanceSummary { n_better: 3, n_worse: 1 });
    }
}
