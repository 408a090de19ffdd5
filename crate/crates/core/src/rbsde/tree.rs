use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solution::{summarize, DriverMode, Layout, Penalty, RbsdeSolution, RowStats};
use super::step::{check_step, solve_step};
use crate::error::{domain, numeric, parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{PathState, TIME_EPS};
use crate::simulate::ControlPolicy;

/// Per-node step result: `Y`, `ΔK`, `Z`, barrier, chosen control.
type NodeCell = (f64, f64, f64, f64, usize);

/// Which controls the tree maximizes over at each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeControl {
    /// Per-node supremum over the whole control set.
    #[default]
    Sup,
    /// A fixed policy; feedback policies see the node position.
    Policy { policy: ControlPolicy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeOptions {
    pub n_steps: usize,
    pub control: TreeControl,
    pub driver: DriverMode,
    /// Replaces the reflection by a penalty when set.
    pub penalty: Option<Penalty>,
    pub keep_grids: bool,
    /// Space step; defaults to `σ_max·√(3·dt)`.
    pub dx: Option<f64>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            n_steps: 50,
            control: TreeControl::Sup,
            driver: DriverMode::Implicit,
            penalty: None,
            keep_grids: false,
            dx: None,
        }
    }
}

impl TreeOptions {
    pub fn steps(n_steps: usize) -> Self {
        Self { n_steps, ..Self::default() }
    }
}

/// Node state: current value on the grid and running extrema merged with
/// the root's.
pub(crate) fn node_state(root: &PathState, t: f64, x: f64) -> PathState {
    let mx = root.run_max.first().copied().unwrap_or(x).max(x);
    let mn = root.run_min.first().copied().unwrap_or(x).min(x);
    PathState::scalar(t, x, mx, mn)
}

/// Trinomial tree with branch probabilities `p_k = σ_k²·dt/(2·dx²)` up and
/// down. Terminal values may be overridden (used for nested solves).
pub(crate) struct TreeProblem<'a> {
    pub data: &'a ProblemData,
    pub root: &'a PathState,
    pub t_end: f64,
    pub opts: &'a TreeOptions,
    pub terminal: Option<&'a (dyn Fn(&PathState) -> f64 + Sync)>,
    /// Nodes where the recursion is replaced by a given value.
    pub stop: Option<&'a (dyn Fn(usize, i64) -> Option<f64> + Sync)>,
}

/// Solves the reflected (or penalized) BSDE on a recombining tree rooted at
/// `root`, maximizing over controls node by node unless a policy is given.
pub fn solve_rbsde_tree(data: &ProblemData, root: &PathState, opts: &TreeOptions) -> Result<RbsdeSolution> {
    TreeProblem { data, root, t_end: data.horizon, opts, terminal: None, stop: None }.solve()
}

/// Penalized BSDE with driver `F + m·(y − h)⁻` on the tree; `K ≡ 0`.
pub fn solve_penalized(
    data: &ProblemData,
    root: &PathState,
    opts: &TreeOptions,
    penalty: Penalty,
) -> Result<RbsdeSolution> {
    let opts = TreeOptions { penalty: Some(penalty), ..opts.clone() };
    solve_rbsde_tree(data, root, &opts)
}

impl TreeProblem<'_> {
    pub fn solve(&self) -> Result<RbsdeSolution> {
        let data = self.data;
        let opts = self.opts;
        data.require_dim(1)?;
        if self.root.dim() != 1 {
            return Err(domain("the tree root must be one-dimensional"));
        }
        let t0 = self.root.t;
        let span = self.t_end - t0;
        if span < -TIME_EPS {
            return Err(domain(format!("root time {t0} lies after the end time {}", self.t_end)));
        }
        let x0 = self.root.x1();
        let terminal_at = |st: &PathState| match self.terminal {
            Some(f) => f(st),
            None => data.xi(st),
        };
        let kind = if opts.penalty.is_some() { "tree-penalized" } else { "tree" };
        let penalty_m = opts.penalty.map(|p| p.m);

        if span <= TIME_EPS {
            let st = node_state(self.root, t0, x0);
            let (xi, h) = (terminal_at(&st), data.h(&st));
            let (y0, dk) = if opts.penalty.is_some() { (xi, 0.0) } else { (xi.max(h), (h - xi).max(0.0)) };
            let rows = [RowStats::of(&[y0], &[dk])];
            return Ok(RbsdeSolution {
                y0,
                std_error: 0.0,
                kind: kind.into(),
                penalty: penalty_m,
                t0,
                dt: 0.0,
                n_steps: 0,
                layout: Layout::Tree { x0, dx: 0.0 },
                y: if opts.keep_grids { vec![vec![y0]] } else { vec![] },
                z: if opts.keep_grids { vec![vec![0.0]] } else { vec![] },
                dk: if opts.keep_grids { vec![vec![dk]] } else { vec![] },
                barrier: if opts.keep_grids { vec![vec![h]] } else { vec![] },
                control: if opts.keep_grids { vec![vec![0]] } else { vec![] },
                summary: summarize(t0, 0.0, &rows),
                warnings: vec![],
            });
        }

        let n = opts.n_steps;
        if n == 0 {
            return Err(parameter("the tree needs at least one step"));
        }
        let dt = span / n as f64;
        check_step(dt, data.l0, opts.driver, opts.penalty)?;
        let n_ctrl = data.controls.len();
        let vols: Vec<f64> = (0..n_ctrl).map(|k| data.controls.vol1(k).abs()).collect();
        let vmax = vols.iter().copied().fold(0.0, f64::max);
        let dx = opts.dx.unwrap_or(vmax * (3.0 * dt).sqrt());
        if !(dx > 0.0) {
            return Err(parameter("the tree needs a positive space step"));
        }
        if vmax * dt.sqrt() > dx * (1.0 + 1e-12) {
            return Err(parameter(format!(
                "space step {dx} is below σ_max·√dt; branch probabilities would be negative"
            )));
        }
        let probs: Vec<f64> = vols.iter().map(|v| v * v * dt / (2.0 * dx * dx)).collect();
        if let TreeControl::Policy { policy } = &opts.control {
            policy.check(n_ctrl)?;
        }

        let keep = opts.keep_grids;
        let mut ys: Vec<Vec<f64>> = Vec::new();
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut dks: Vec<Vec<f64>> = Vec::new();
        let mut hs: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<Vec<usize>> = Vec::new();
        let mut rows: Vec<RowStats> = Vec::with_capacity(n + 1);

        // Terminal row.
        let t_n = t0 + n as f64 * dt;
        let term: Vec<(f64, f64, f64)> = (0..2 * n + 1)
            .into_par_iter()
            .map(|o| {
                let j = o as i64 - n as i64;
                let st = node_state(self.root, t_n, x0 + j as f64 * dx);
                if let Some(v) = self.stop.and_then(|s| s(n, j)) {
                    return (v, 0.0, data.h(&st));
                }
                let (xi, h) = (terminal_at(&st), data.h(&st));
                if opts.penalty.is_some() {
                    (xi, 0.0, h)
                } else {
                    (xi.max(h), (h - xi).max(0.0), h)
                }
            })
            .collect();
        let mut next: Vec<f64> = term.iter().map(|r| r.0).collect();
        let row_dk: Vec<f64> = term.iter().map(|r| r.1).collect();
        rows.push(RowStats::of(&next, &row_dk));
        if keep {
            ys.push(next.clone());
            zs.push(vec![0.0; next.len()]);
            dks.push(row_dk);
            hs.push(term.iter().map(|r| r.2).collect());
            cs.push(vec![0; next.len()]);
        }

        for i in (0..n).rev() {
            let t = t0 + i as f64 * dt;
            let width = 2 * i + 1;
            let cells: Vec<Result<NodeCell>> = (0..width)
                .into_par_iter()
                .with_min_len(64)
                .map(|o| {
                    let j = o as i64 - i as i64;
                    let x = x0 + j as f64 * dx;
                    let st = node_state(self.root, t, x);
                    let h = data.h(&st);
                    if let Some(v) = self.stop.and_then(|s| s(i, j)) {
                        return Ok((v, 0.0, 0.0, h, 0));
                    }
                    // Children of offset o at step i sit at o, o+1, o+2 of step i+1.
                    let (dn, mid, up) = (next[o], next[o + 1], next[o + 2]);
                    let z = (up - dn) / (2.0 * dx);
                    let pen = opts.penalty.map(|p| (p, h));
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    let mut eval = |k: usize| -> Result<()> {
                        let p = probs[k];
                        let e = p * (up + dn) + (1.0 - 2.0 * p) * mid;
                        let v = solve_step(e, |y| data.f1(&st, y, z, k), dt, opts.driver, pen)?;
                        if v > best {
                            best = v;
                            arg = k;
                        }
                        Ok(())
                    };
                    match &opts.control {
                        TreeControl::Sup => {
                            for k in 0..n_ctrl {
                                eval(k)?;
                            }
                        }
                        TreeControl::Policy { policy } => eval(policy.control(i, &[x]))?,
                    }
                    if !best.is_finite() {
                        return Err(numeric(format!("non-finite tree value at step {i}, node {j}")));
                    }
                    if opts.penalty.is_some() {
                        Ok((best, 0.0, z, h, arg))
                    } else {
                        Ok((best.max(h), (h - best).max(0.0), z, h, arg))
                    }
                })
                .collect();
            let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
            next = cells.iter().map(|c| c.0).collect();
            let row_dk: Vec<f64> = cells.iter().map(|c| c.1).collect();
            rows.push(RowStats::of(&next, &row_dk));
            if keep {
                ys.push(next.clone());
                zs.push(cells.iter().map(|c| c.2).collect());
                dks.push(row_dk);
                hs.push(cells.iter().map(|c| c.3).collect());
                cs.push(cells.iter().map(|c| c.4).collect());
            }
        }
        rows.reverse();
        for g in [&mut ys, &mut zs, &mut dks, &mut hs] {
            g.reverse();
        }
        cs.reverse();
        Ok(RbsdeSolution {
            y0: next[0],
            std_error: 0.0,
            kind: kind.into(),
            penalty: penalty_m,
            t0,
            dt,
            n_steps: n,
            layout: Layout::Tree { x0, dx },
            y: ys,
            z: zs,
            dk: dks,
            barrier: hs,
            control: cs,
            summary: summarize(t0, dt, &rows),
            warnings: vec![],
        })
    }
}
