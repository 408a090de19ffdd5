use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{least_squares, predict, Basis, BasisSpec};
use super::solution::{summarize, DriverMode, Layout, Penalty, RbsdeSolution, RowStats};
use super::step::{check_step, solve_step};
use crate::error::{numeric, parameter, Result};
use crate::model::ProblemData;
use crate::simulate::PathBundle;

/// Per-path data seen by the regression solver. Implemented for the model
/// data read along a bundle and for frozen data replays.
pub trait PathData: Sync {
    fn barrier(&self, p: usize, i: usize) -> f64;
    fn terminal(&self, p: usize) -> f64;
    /// `F` at path `p`, step `i`; `sz` is already `σ(k)ᵀz`.
    fn driver(&self, p: usize, i: usize, y: f64, sz: &[f64], k: usize) -> f64;
    fn lipschitz(&self) -> f64;
    /// Whether running extrema carry information for the regression.
    fn path_dependent(&self) -> bool;
    /// Number of additional regression features per path and step.
    fn n_extra(&self) -> usize {
        0
    }
    fn extra_features(&self, _p: usize, _i: usize, _out: &mut [f64]) {}
    /// A value known at step `i` that bounds the solution at step `i + 1`
    /// from below. Only the excess over it is fitted, and the fitted
    /// conditional mean is kept above it.
    fn target_offset(&self, _p: usize, _i: usize) -> Option<f64> {
        None
    }
}

/// Per-path step result: reported `Y`, `ΔK`, carried `Y`, barrier, `σᵀZ`.
type PathCell = (f64, f64, f64, f64, Vec<f64>);

/// [`ProblemData`] evaluated along the paths of a bundle.
pub struct BundleData<'a> {
    pub data: &'a ProblemData,
    pub bundle: &'a PathBundle,
}

impl PathData for BundleData<'_> {
    fn barrier(&self, p: usize, i: usize) -> f64 {
        self.data.h(&self.bundle.state(p, i))
    }

    fn terminal(&self, p: usize) -> f64 {
        self.data.xi(&self.bundle.state(p, self.bundle.n_steps))
    }

    fn driver(&self, p: usize, i: usize, y: f64, sz: &[f64], k: usize) -> f64 {
        self.data.f(&self.bundle.state(p, i), y, sz, k)
    }

    fn lipschitz(&self) -> f64 {
        self.data.l0
    }

    fn path_dependent(&self) -> bool {
        self.data.path_dependent
    }
}

/// What is carried backward between regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LsmcTargets {
    /// Realized pathwise values, replaced by the barrier where it is
    /// reached (less biased for stopping problems).
    #[default]
    Pathwise,
    /// The regressed value `max(h, Ĉ)` itself.
    Regressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsmcOptions {
    pub basis: BasisSpec,
    pub targets: LsmcTargets,
    pub driver: DriverMode,
    pub penalty: Option<Penalty>,
    /// Gram condition number above which a ridge penalty is added.
    pub cond_limit: f64,
    pub keep_paths: bool,
}

impl Default for LsmcOptions {
    fn default() -> Self {
        Self {
            basis: BasisSpec::default(),
            targets: LsmcTargets::Pathwise,
            driver: DriverMode::Implicit,
            penalty: None,
            cond_limit: 1e10,
            keep_paths: false,
        }
    }
}

/// Backward regression solve of the reflected BSDE along a fixed-policy
/// bundle.
pub fn solve_rbsde_lsmc(data: &ProblemData, bundle: &PathBundle, opts: &LsmcOptions) -> Result<RbsdeSolution> {
    solve_lsmc_with(&BundleData { data, bundle }, data, bundle, opts)
}

/// Regression solve with custom per-path data; `data` supplies only the
/// control set.
pub fn solve_lsmc_with(
    pd: &dyn PathData,
    data: &ProblemData,
    bundle: &PathBundle,
    opts: &LsmcOptions,
) -> Result<RbsdeSolution> {
    let n = bundle.n_steps;
    let np = bundle.n_paths;
    let d = bundle.dim;
    let dt = bundle.dt;
    if np == 0 {
        return Err(parameter("the bundle has no paths"));
    }
    if n > 0 {
        check_step(dt, pd.lipschitz(), opts.driver, opts.penalty)?;
    }
    let inv: Vec<DMatrix<f64>> = (0..data.controls.len())
        .map(|k| {
            data.controls
                .sigma(k)
                .clone()
                .try_inverse()
                .ok_or_else(|| parameter(format!("volatility of control {k} is singular")))
        })
        .collect::<Result<_>>()?;
    let penalized = opts.penalty.is_some();
    let keep = opts.keep_paths;
    let extrema = opts.basis.extrema && pd.path_dependent();
    let n_base = if extrema { 3 * d } else { d };
    let n_poly = n_base + pd.n_extra();
    let n_feat = n_poly + usize::from(opts.basis.barrier);

    let mut rows: Vec<RowStats> = Vec::with_capacity(n + 1);
    let (mut ys, mut zs, mut dks, mut hs, mut cs) = (vec![], vec![], vec![], vec![], vec![]);
    let mut warnings = Vec::new();

    // Terminal row.
    let term: Vec<(f64, f64, f64)> = (0..np)
        .into_par_iter()
        .map(|p| {
            let (xi, h) = (pd.terminal(p), pd.barrier(p, n));
            if penalized {
                (xi, 0.0, h)
            } else {
                (xi.max(h), (h - xi).max(0.0), h)
            }
        })
        .collect();
    let mut cur: Vec<f64> = term.iter().map(|r| r.0).collect();
    {
        let dk: Vec<f64> = term.iter().map(|r| r.1).collect();
        rows.push(RowStats::of(&cur, &dk));
        if keep {
            ys.push(cur.clone());
            zs.push(vec![0.0; np * d]);
            dks.push(dk);
            hs.push(term.iter().map(|r| r.2).collect());
            cs.push(vec![0usize; np]);
        }
    }
    if cur.iter().any(|v| !v.is_finite()) {
        return Err(numeric("non-finite terminal values"));
    }

    let mut ridge_steps = 0usize;
    let mut worst_cond = 0.0f64;
    let mut reported0 = cur[0];
    let mut carried1 = cur.clone();
    for i in (0..n).rev() {
        let mut feats = vec![0.0; np * n_feat];
        feats.par_chunks_mut(n_feat).enumerate().for_each(|(p, row)| {
            let st = bundle.state(p, i);
            row[..d].copy_from_slice(&st.x);
            if extrema {
                row[d..2 * d].copy_from_slice(&st.run_max);
                row[2 * d..n_base].copy_from_slice(&st.run_min);
            }
            pd.extra_features(p, i, &mut row[n_base..n_poly]);
            if n_feat > n_poly {
                row[n_poly] = pd.barrier(p, i);
            }
        });
        let basis = Basis::fit(&feats, n_feat, opts.basis.degree, n_feat - n_poly);
        let offset: Option<Vec<f64>> = (0..np).map(|p| pd.target_offset(p, i)).collect();
        let first = match &offset {
            Some(o) => cur.iter().zip(o).map(|(c, o)| c - o).collect(),
            None => cur.clone(),
        };
        let mut tg: Vec<Vec<f64>> = vec![first];
        for c in 0..d {
            tg.push(
                (0..np)
                    .into_par_iter()
                    .with_min_len(1024)
                    .map(|p| cur[p] * (bundle.disp(p, i + 1)[c] - bundle.disp(p, i)[c]) / dt)
                    .collect(),
            );
        }
        let refs: Vec<&[f64]> = tg.iter().map(|v| v.as_slice()).collect();
        let fit = least_squares(&basis, &feats, n_feat, &refs, opts.cond_limit)?;
        worst_cond = worst_cond.max(fit.cond);
        if fit.ridge {
            ridge_steps += 1;
        }
        let mut pred = predict(&basis, &feats, n_feat, &fit.coef);
        if let Some(o) = &offset {
            pred[0].iter_mut().zip(o).for_each(|(v, o)| *v = o + v.max(0.0));
        }

        let cells: Vec<Result<PathCell>> = (0..np)
            .into_par_iter()
            .with_min_len(256)
            .map(|p| {
                let k = bundle.control(p, i);
                let a: Vec<f64> = (1..=d).map(|c| pred[c][p]).collect();
                let s = &inv[k];
                let sz: Vec<f64> = (0..d).map(|r| (0..d).map(|c| s[(r, c)] * a[c]).sum()).collect();
                let h = pd.barrier(p, i);
                let pen = opts.penalty.map(|q| (q, h));
                let c_hat = solve_step(pred[0][p], |y| pd.driver(p, i, y, &sz, k), dt, opts.driver, pen)?;
                if !c_hat.is_finite() {
                    return Err(numeric(format!("non-finite continuation at step {i}")));
                }
                let f_dt = pd.driver(p, i, c_hat, &sz, k) * dt;
                let (reported, dk, carried) = match (penalized, opts.targets) {
                    (true, LsmcTargets::Regressed) => (c_hat, 0.0, c_hat),
                    (true, LsmcTargets::Pathwise) => {
                        let m = opts.penalty.map_or(0.0, |q| q.m);
                        (c_hat, 0.0, cur[p] + f_dt + m * (h - c_hat).max(0.0) * dt)
                    }
                    (false, _) if h >= c_hat => (h, h - c_hat, h),
                    (false, LsmcTargets::Regressed) => (c_hat, 0.0, c_hat),
                    (false, LsmcTargets::Pathwise) => (c_hat, 0.0, cur[p] + f_dt),
                };
                Ok((reported, dk, carried, h, sz))
            })
            .collect();
        let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
        let reported: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let dk: Vec<f64> = cells.iter().map(|c| c.1).collect();
        rows.push(RowStats::of(&reported, &dk));
        if i == 0 {
            reported0 = reported[0];
            carried1 = cur.clone();
        }
        cur = cells.iter().map(|c| c.2).collect();
        if keep {
            ys.push(reported);
            zs.push(cells.iter().flat_map(|c| c.4.iter().copied()).collect());
            dks.push(dk);
            hs.push(cells.iter().map(|c| c.3).collect());
            cs.push((0..np).map(|p| bundle.control(p, i)).collect());
        }
    }
    if ridge_steps > 0 {
        // Also carried in the solution warnings; the frozen-scheme fallback
        // triggers this on many tiny bundles.
        let msg = format!("ridge fallback at {ridge_steps} step(s); worst Gram condition number {worst_cond:.3e}");
        log::debug!("{msg}");
        warnings.push(msg);
    }
    rows.reverse();
    for g in [&mut ys, &mut dks, &mut hs, &mut zs] {
        g.reverse();
    }
    cs.reverse();
    let std_error = if n == 0 { 0.0 } else { pair_std_error(&carried1, bundle.antithetic) };
    Ok(RbsdeSolution {
        y0: reported0,
        std_error,
        kind: if penalized { "lsmc-penalized".into() } else { "lsmc".into() },
        penalty: opts.penalty.map(|p| p.m),
        t0: bundle.t0,
        dt,
        n_steps: n,
        layout: Layout::Paths { n_paths: np },
        y: ys,
        z: zs,
        dk: dks,
        barrier: hs,
        control: cs,
        summary: summarize(bundle.t0, dt, &rows),
        warnings,
    })
}

/// Standard error of the mean, over antithetic pair means when paired.
pub(crate) fn pair_std_error(v: &[f64], antithetic: bool) -> f64 {
    let xs: Vec<f64> = if antithetic && v.len() >= 4 {
        v.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    } else {
        v.to_vec()
    };
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
