//! Thick-restart Lanczos for a few extreme eigenpairs of a sparse symmetric
//! operator, with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::rng::{stream_rng, tag};

pub struct LanczosResult {
    /// Eigenvalues of the operator, descending.
    pub values: Vec<f64>,
    /// Matching unit eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthogonalizes `w` against `basis` (two passes) and `locked`; returns the
/// first-pass coefficients plus the corrections.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], locked: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; basis.len()];
    for _ in 0..2 {
        for l in locked {
            let c = dot(l, w);
            axpy(-c, l, w);
        }
        for (i, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            h[i] += c;
            axpy(-c, v, w);
        }
    }
    h
}

/// Largest `want` eigenpairs of the symmetric operator `apply` on `R^n`,
/// restricted to the orthogonal complement of `locked`.
pub fn largest_eigenpairs(
    n: usize,
    want: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    locked: &[Vec<f64>],
    scale: f64,
    seed: u64,
) -> LanczosResult {
    let free = n.saturating_sub(locked.len());
    let want = want.min(free);
    if want == 0 {
        return LanczosResult { values: vec![], vectors: vec![], converged: true };
    }
    let kmax = free.min((2 * want + 20).max(want + 40));
    let tol = 1e-10 * scale.max(1.0);
    let mut rng = stream_rng(&[tag("lanczos"), seed, n as u64]);
    let mut random_unit = |basis: &[Vec<f64>]| loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis, locked);
        if normalize(&mut v) > 1e-8 {
            break v;
        }
    };

    let mut basis: Vec<Vec<f64>> = vec![random_unit(&[])];
    let mut t = DMatrix::<f64>::zeros(kmax, kmax);
    let mut start = 0;
    let mut w = vec![0.0; n];
    let max_restarts = 1000;
    for restart in 0..=max_restarts {
        let mut residual = vec![0.0; n];
        let mut beta_last = 0.0;
        for j in start..kmax {
            apply(&basis[j], &mut w);
            let h = orthogonalize(&mut w, &basis, locked);
            for (i, &hi) in h.iter().enumerate() {
                t[(i, j)] = hi;
                t[(j, i)] = hi;
            }
            let beta = dot(&w, &w).sqrt();
            if j + 1 == kmax {
                beta_last = beta;
                residual.copy_from_slice(&w);
                break;
            }
            if beta <= 1e-12 * scale.max(1.0) {
                let v = random_unit(&basis);
                basis.push(v);
            } else {
                basis.push(w.iter().map(|x| x / beta).collect());
            }
        }
        let eig = SymmetricEigen::new(t.clone());
        let mut order: Vec<usize> = (0..kmax).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let res_norm = |i: usize| (beta_last * eig.eigenvectors[(kmax - 1, i)]).abs();
        let done = order[..want].iter().all(|&i| res_norm(i) <= tol);
        let ritz = |i: usize| {
            let mut y = vec![0.0; n];
            for (k, v) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(k, i)], v, &mut y);
            }
            y
        };
        if done || restart == max_restarts || kmax == free {
            let vectors = order[..want].iter().map(|&i| {
                let mut y = ritz(i);
                normalize(&mut y);
                y
            });
            return LanczosResult {
                values: order[..want].iter().map(|&i| eig.eigenvalues[i]).collect(),
                vectors: vectors.collect(),
                converged: done || kmax == free,
            };
        }
        let keep = (want + (kmax - want) / 2).min(kmax - 1);
        let mut next: Vec<Vec<f64>> = order[..keep].iter().map(|&i| ritz(i)).collect();
        t.fill(0.0);
        for (k, &i) in order[..keep].iter().enumerate() {
            t[(k, k)] = eig.eigenvalues[i];
        }
        let mut r = residual;
        orthogonalize(&mut r, &next, locked);
        if normalize(&mut r) <= 1e-8 {
            r = random_unit(&next);
        }
        next.push(r);
        basis = next;
        start = keep;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_on_diagonal_operator() {
        let n = 300;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64 * 0.01).collect();
        let r = largest_eigenpairs(
            n,
            5,
            |x, y| {
                for i in 0..n {
                    y[i] = diag[i] * x[i];
                }
            },
            &[],
            20.0,
            1,
        );
        let mut sorted = diag.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!(r.converged);
        for k in 0..5 {
            assert!((r.values[k] - sorted[k]).abs() < 1e-8, "{k}: {} vs {}", r.values[k], sorted[k]);
        }
    }
}
