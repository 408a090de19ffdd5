use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{numeric, Result};

/// Rows per reduction chunk. Fixed so sums do not depend on the thread pool.
pub(crate) const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSpec {
    /// Total polynomial degree.
    pub degree: usize,
    /// Add running maximum and minimum as features.
    pub extrema: bool,
    /// Add the barrier value as a linear feature. It carries the kink of
    /// payoffs such as `|x|` or a put, which low-degree polynomials miss.
    pub barrier: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { degree: 2, extrema: true, barrier: true }
    }
}

/// Exponent vectors of all monomials of total degree `≤ degree` in `n`
/// variables, constant first.
pub(crate) fn monomials(n: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e as u32);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

/// Standardized polynomial basis fitted to one step's features.
pub(crate) struct Basis {
    mean: Vec<f64>,
    scale: Vec<f64>,
    keep: Vec<usize>,
    powers: Vec<Vec<u32>>,
}

impl Basis {
    /// `features` is row-major with `n_feat` columns; the last `n_linear`
    /// enter linearly, the others through all monomials up to `degree`.
    /// Constant columns are dropped.
    pub fn fit(features: &[f64], n_feat: usize, degree: usize, n_linear: usize) -> Self {
        let rows = features.len() / n_feat.max(1);
        let mut mean = vec![0.0; n_feat];
        let mut scale = vec![0.0; n_feat];
        let mut keep = Vec::new();
        for c in 0..n_feat {
            let m = features.chunks(n_feat).map(|r| r[c]).sum::<f64>() / rows.max(1) as f64;
            let v = features.chunks(n_feat).map(|r| (r[c] - m).powi(2)).sum::<f64>() / rows.max(1) as f64;
            let sd = v.sqrt();
            mean[c] = m;
            if sd > 1e-12 * (1.0 + m.abs()) {
                scale[c] = sd;
                keep.push(c);
            }
        }
        let n_poly = keep.iter().filter(|&&c| c < n_feat - n_linear).count();
        let n_lin = keep.len() - n_poly;
        let mut powers: Vec<Vec<u32>> = monomials(n_poly, degree)
            .into_iter()
            .map(|mut e| {
                e.resize(keep.len(), 0);
                e
            })
            .collect();
        for l in 0..n_lin {
            let mut e = vec![0; keep.len()];
            e[n_poly + l] = 1;
            powers.push(e);
        }
        Self { mean, scale, keep, powers }
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn eval(&self, row: &[f64], out: &mut [f64]) {
        let z: Vec<f64> = self.keep.iter().map(|&c| (row[c] - self.mean[c]) / self.scale[c]).collect();
        for (o, pw) in out.iter_mut().zip(&self.powers) {
            *o = pw.iter().zip(&z).map(|(e, v)| v.powi(*e as i32)).product();
        }
    }
}

pub(crate) struct Fit {
    /// One coefficient vector per target.
    pub coef: Vec<DVector<f64>>,
    pub cond: f64,
    pub ridge: bool,
}

/// Least squares for several targets sharing one design. Falls back to a
/// ridge penalty when the Gram matrix condition number exceeds `cond_limit`.
pub(crate) fn least_squares(
    basis: &Basis,
    features: &[f64],
    n_feat: usize,
    targets: &[&[f64]],
    cond_limit: f64,
) -> Result<Fit> {
    let b = basis.len();
    let nt = targets.len();
    let rows = features.len() / n_feat;
    let n_chunks = rows.div_ceil(CHUNK);
    let partial: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = DMatrix::zeros(b, b);
            let mut r = DMatrix::zeros(b, nt);
            let mut phi = vec![0.0; b];
            for p in c * CHUNK..((c + 1) * CHUNK).min(rows) {
                basis.eval(&features[p * n_feat..(p + 1) * n_feat], &mut phi);
                for u in 0..b {
                    for v in u..b {
                        g[(u, v)] += phi[u] * phi[v];
                    }
                    for (t, tg) in targets.iter().enumerate() {
                        r[(u, t)] += phi[u] * tg[p];
                    }
                }
            }
            (g, r)
        })
        .collect();
    let mut gram = DMatrix::zeros(b, b);
    let mut rhs = DMatrix::zeros(b, nt);
    for (g, r) in &partial {
        gram += g;
        rhs += r;
    }
    for u in 0..b {
        for v in 0..u {
            gram[(u, v)] = gram[(v, u)];
        }
    }
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), e| (l.min(*e), h.max(*e)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let ridge = !(cond <= cond_limit);
    if ridge {
        let lam = 1e-8 * gram.trace().max(1e-300) / b as f64;
        for u in 0..b {
            gram[(u, u)] += lam;
        }
    }
    let chol = gram.cholesky().ok_or_else(|| numeric("regression Gram matrix is not positive definite"))?;
    let sol = chol.solve(&rhs);
    let coef = (0..nt).map(|t| sol.column(t).into_owned()).collect();
    Ok(Fit { coef, cond, ridge })
}

/// Evaluates the fitted regressions at every row.
pub(crate) fn predict(basis: &Basis, features: &[f64], n_feat: usize, coef: &[DVector<f64>]) -> Vec<Vec<f64>> {
    let b = basis.len();
    let rows = features.len() / n_feat;
    let per_row: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|p| {
            let mut phi = vec![0.0; b];
            basis.eval(&features[p * n_feat..(p + 1) * n_feat], &mut phi);
            coef.iter().map(|c| c.iter().zip(&phi).map(|(a, f)| a * f).sum()).collect()
        })
        .collect();
    (0..coef.len()).map(|t| per_row.iter().map(|r| r[t]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(0, 2), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn recovers_quadratic_exactly() {
        let xs: Vec<f64> = (0..500).map(|i| -2.0 + 4.0 * i as f64 / 499.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x).collect();
        let basis = Basis::fit(&xs, 1, 2, 0);
        let fit = least_squares(&basis, &xs, 1, &[&ys], 1e10).unwrap();
        assert!(!fit.ridge);
        let pred = predict(&basis, &xs, 1, &fit.coef);
        for (p, y) in pred[0].iter().zip(&ys) {
            assert!((p - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_features_reduce_to_mean() {
        let xs = vec![3.0; 10];
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let basis = Basis::fit(&xs, 1, 2, 0);
        assert_eq!(basis.len(), 1);
        let fit = least_squares(&basis, &xs, 1, &[&ys], 1e10).unwrap();
        assert!((fit.coef[0][0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_features_trigger_ridge() {
        let xs: Vec<f64> = (0..200).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let basis = Basis::fit(&xs, 2, 1, 0);
        let fit = least_squares(&basis, &xs, 2, &[&ys], 1e10).unwrap();
        assert!(fit.ridge);
        let pred = predict(&basis, &xs, 2, &fit.coef);
        assert!((pred[0][100] - 100.0).abs() < 1e-3);
    }
}
