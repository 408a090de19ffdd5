use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::path_space::{level_cascade, DiscretePath};
use crate::simulate::path_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HittingGapOptions {
    pub alpha: f64,
    /// Start offsets; each must satisfy `|x| ≤ alpha`.
    pub xs: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Drift bound; the extremal volatilities are `c0` and `√(2L)`.
    pub l: f64,
    pub c0: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for HittingGapOptions {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            xs: vec![0.0, 0.0125, 0.025, 0.05, 0.1],
            deltas: vec![0.02, 0.05, 0.1, 0.2],
            l: 1.0,
            c0: 0.5,
            horizon: 1.0,
            n_steps: 1000,
            n_paths: 20_000,
            seed: 5,
        }
    }
}

impl HittingGapOptions {
    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.l > 0.0 && self.c0 > 0.0 && self.horizon > 0.0) {
            return Err(parameter("alpha, L, c0 and the horizon must be positive"));
        }
        if self.n_steps == 0 || self.n_paths < 2 {
            return Err(parameter("need at least one step and two paths"));
        }
        if let Some(x) = self.xs.iter().find(|x| !(x.abs() <= self.alpha)) {
            return Err(parameter(format!("offset {x} lies outside the level {}", self.alpha)));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(parameter("gap thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub x: f64,
    pub delta: f64,
    /// Estimated `P(sup_i |ch_i^x − ch_i^0| > δ)`.
    pub prob: f64,
    pub std_error: f64,
    /// `fit · |x| / √δ` with the fitted constant.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstHitRow {
    pub x: f64,
    pub mean_gap: f64,
    pub std_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingGapReport {
    pub alpha: f64,
    pub n_paths: usize,
    pub rows: Vec<GapRow>,
    pub first_hit: Vec<FirstHitRow>,
    /// Least-squares slope of `E|ch_0^x − ch_0^0|` against `|x|`.
    pub first_hit_slope: f64,
    /// Smallest constant with `P ≤ c·|x|/√δ` on every row with `x ≠ 0`.
    pub prob_fit: f64,
    /// Share of paths with `|ω_s − ω_r| ≤ K|s − r|^{1/3}` on dyadic lags.
    pub holder_frequency: f64,
    pub holder_k: f64,
    pub zero_offset_exact: bool,
    pub nonincreasing_in_delta: bool,
    pub vanishing_in_x: bool,
    /// Every mean first-hit gap lies under twice the fitted line, up to two
    /// standard errors.
    pub linear_dominated: bool,
}

/// Extremal constant actions `(drift, vol)` of the nonlinear expectation.
fn actions(l: f64, c0: f64) -> Vec<(f64, f64)> {
    let hi = (2.0 * l).sqrt();
    let mut out = Vec::new();
    for b in [-l, 0.0, l] {
        for s in [c0, hi] {
            out.push((b, s));
        }
    }
    out
}

fn simulate(opts: &HittingGapOptions, p: usize, acts: &[(f64, f64)]) -> DiscretePath {
    let dt = opts.horizon / opts.n_steps as f64;
    let (b, s) = acts[p % acts.len()];
    let mut rng = path_rng(opts.seed, p, false);
    let mut v = Vec::with_capacity(opts.n_steps + 1);
    let mut x = 0.0;
    v.push(x);
    for _ in 0..opts.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        x += b * dt + s * dt.sqrt() * z;
        v.push(x);
    }
    DiscretePath::new(0.0, dt, 1, v).expect("grid path")
}

fn holder_ok(path: &DiscretePath, k: f64) -> bool {
    let v = path.values();
    let mut lag = 1;
    while lag < v.len() {
        let h = (lag as f64 * path.dt()).cbrt();
        if v.windows(lag + 1).any(|w| (w[lag] - w[0]).abs() > k * h) {
            return false;
        }
        lag *= 2;
    }
    true
}

/// Monte Carlo estimates of the cascade gap `sup_i |ch_i^x − ch_i^0|` over
/// paths driven by extremal constant controls, shared across all offsets
/// and thresholds.
pub fn hitting_gap_diagnostic(opts: &HittingGapOptions) -> Result<HittingGapReport> {
    opts.check()?;
    let acts = actions(opts.l, opts.c0);
    let holder_k = 3.0 * (2.0 * opts.l).sqrt().max(opts.c0);
    let nx = opts.xs.len();
    let h = opts.horizon;

    // Per path: (sup gap, first-hit gap) per offset, Hölder flag.
    let per_path: Vec<(Vec<(f64, f64)>, bool)> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| -> Result<_> {
            let path = simulate(opts, p, &acts);
            let base = level_cascade(0.0, &[0.0], opts.alpha, &path, 0.0, h)?;
            let mut gaps = Vec::with_capacity(nx);
            for &x in &opts.xs {
                let c = level_cascade(0.0, &[x], opts.alpha, &path, 0.0, h)?;
                // Missing entries sit at the horizon.
                let n = c.len().max(base.len());
                let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(h);
                let sup = (0..n).map(|i| (at(&c.times, i) - at(&base.times, i)).abs()).fold(0.0, f64::max);
                gaps.push((sup, (c.times[0] - base.times[0]).abs()));
            }
            Ok((gaps, holder_ok(&path, holder_k)))
        })
        .collect::<Result<_>>()?;

    let n = opts.n_paths as f64;
    let mut first_hit = Vec::with_capacity(nx);
    for (j, &x) in opts.xs.iter().enumerate() {
        let (s, s2) = per_path.iter().fold((0.0, 0.0), |(a, b), (g, _)| (a + g[j].1, b + g[j].1 * g[j].1));
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        first_hit.push(FirstHitRow { x, mean_gap: mean, std_error: (var / (n - 1.0)).sqrt(), bound: 0.0 });
    }
    let (sxy, sxx) = first_hit.iter().fold((0.0, 0.0), |(a, b), r| (a + r.x.abs() * r.mean_gap, b + r.x * r.x));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    for r in &mut first_hit {
        r.bound = 2.0 * slope * r.x.abs();
    }

    let mut rows = Vec::with_capacity(nx * opts.deltas.len());
    for (j, &x) in opts.xs.iter().enumerate() {
        for &delta in &opts.deltas {
            let hits = per_path.iter().filter(|(g, _)| g[j].0 > delta).count() as f64;
            let prob = hits / n;
            rows.push(GapRow { x, delta, prob, std_error: (prob * (1.0 - prob) / n).sqrt(), bound: 0.0 });
        }
    }
    let prob_fit = rows.iter().filter(|r| r.x != 0.0).map(|r| r.prob * r.delta.sqrt() / r.x.abs()).fold(0.0, f64::max);
    for r in &mut rows {
        r.bound = prob_fit * r.x.abs() / r.delta.sqrt();
    }

    let zero_offset_exact = rows.iter().filter(|r| r.x == 0.0).all(|r| r.prob == 0.0)
        && first_hit.iter().filter(|r| r.x == 0.0).all(|r| r.mean_gap == 0.0);
    let nonincreasing_in_delta = opts.xs.iter().all(|&x| {
        let mut v: Vec<&GapRow> = rows.iter().filter(|r| r.x == x).collect();
        v.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        v.windows(2).all(|w| w[1].prob <= w[0].prob)
    });
    let vanishing_in_x = opts.deltas.iter().all(|&d| {
        let mut v: Vec<&GapRow> = rows.iter().filter(|r| r.delta == d).collect();
        v.sort_by(|a, b| a.x.abs().total_cmp(&b.x.abs()));
        v.windows(2).all(|w| w[0].prob <= w[1].prob + 2.0 * (w[0].std_error + w[1].std_error))
    }) && {
        // The smallest nonzero offset carries less than the largest.
        let nz: Vec<&GapRow> = rows.iter().filter(|r| r.x != 0.0).collect();
        let lo = nz.iter().map(|r| r.x.abs()).fold(f64::INFINITY, f64::min);
        let hi = nz.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
        let tot = |a: f64| nz.iter().filter(|r| r.x.abs() == a).map(|r| r.prob).sum::<f64>();
        nz.is_empty() || lo == hi || tot(lo) <= tot(hi)
    };
    let linear_dominated = first_hit.iter().all(|r| r.mean_gap <= r.bound + 2.0 * r.std_error);
    let holder_frequency = per_path.iter().filter(|(_, ok)| *ok).count() as f64 / n;

    Ok(HittingGapReport {
        alpha: opts.alpha,
        n_paths: opts.n_paths,
        rows,
        first_hit,
        first_hit_slope: slope,
        prob_fit,
        holder_frequency,
        holder_k,
        zero_offset_exact,
        nonincreasing_in_delta,
        vanishing_in_x,
        linear_dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HittingGapOptions {
        HittingGapOptions { n_paths: 3000, n_steps: 400, ..HittingGapOptions::default() }
    }

    #[test]
    fn zero_offset_has_no_gap() {
        let r = hitting_gap_diagnostic(&HittingGapOptions { xs: vec![0.0], ..small() }).unwrap();
        assert!(r.zero_offset_exact);
        assert!(r.rows.iter().all(|r| r.prob == 0.0));
    }

    #[test]
    fn trends_hold() {
        let r = hitting_gap_diagnostic(&small()).unwrap();
        assert!(r.nonincreasing_in_delta, "{r:#?}");
        assert!(r.vanishing_in_x, "{r:#?}");
        assert!(r.linear_dominated, "{r:#?}");
        assert!(r.first_hit_slope > 0.0);
        assert!(r.holder_frequency > 0.5 && r.holder_frequency <= 1.0);
    }

    #[test]
    fn deterministic() {
        let o = HittingGapOptions { n_paths: 500, n_steps: 200, ..HittingGapOptions::default() };
        assert_eq!(hitting_gap_diagnostic(&o).unwrap(), hitting_gap_diagnostic(&o).unwrap());
    }

    #[test]
    fn offsets_outside_level_rejected() {
        let o = HittingGapOptions { xs: vec![0.5], ..small() };
        assert_eq!(hitting_gap_diagnostic(&o).unwrap_err().kind(), "parameter");
    }
}
