use serde::{Deserialize, Serialize};

use super::freeze::FrozenCell;
use crate::error::{numeric, parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{PathState, TIME_EPS};

/// Which cell function is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellKind {
    /// `θ`: penalty `m(θ − ĥ)⁻`.
    Penalized { m: f64 },
    /// `Γ`: obstacle `Γ ≥ ĥ`.
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellMesh {
    /// Nodes per half-width: `Δx = α / j_half`.
    pub j_half: usize,
    /// Bound on `σ_max²·Δt/Δx²`.
    pub cfl: f64,
    /// Fixed number of time steps; derived from `cfl` when absent.
    pub nt: Option<usize>,
    /// The derived step count is rounded up to a multiple of this.
    pub nt_multiple: usize,
    pub psor_tol: f64,
    pub psor_max_iter: usize,
    pub psor_omega: f64,
}

impl Default for CellMesh {
    fn default() -> Self {
        Self { j_half: 50, cfl: 4.0, nt: None, nt_multiple: 1, psor_tol: 1e-8, psor_max_iter: 10_000, psor_omega: 1.2 }
    }
}

impl CellMesh {
    pub fn check(&self) -> Result<()> {
        if self.j_half < 2 || !(self.cfl > 0.0) || self.nt_multiple == 0 {
            return Err(parameter("cell mesh needs j_half ≥ 2, cfl > 0 and nt_multiple ≥ 1"));
        }
        if !(self.psor_tol > 0.0) || self.psor_max_iter == 0 || !(self.psor_omega > 0.0 && self.psor_omega < 2.0) {
            return Err(parameter("PSOR needs tol > 0, iterations ≥ 1 and 0 < ω < 2"));
        }
        Ok(())
    }

    /// Time steps for a cell of duration `dur`.
    pub fn steps(&self, dur: f64, dx: f64, sigma_max: f64, l0: f64) -> Result<usize> {
        let ratio = |nt: usize| sigma_max * sigma_max * (dur / nt as f64) / (dx * dx);
        let nt = match self.nt {
            Some(nt) => {
                if nt == 0 || ratio(nt) > self.cfl * (1.0 + 1e-12) {
                    return Err(parameter(format!(
                        "{nt} time steps give σ²Δt/Δx² = {:.3} above the CFL bound {}",
                        ratio(nt.max(1)),
                        self.cfl
                    )));
                }
                nt
            }
            None => {
                let nt = (dur * sigma_max * sigma_max / (self.cfl * dx * dx)).ceil() as usize;
                let nt = nt.max((2.0 * dur * l0).ceil() as usize).max(1);
                nt.div_ceil(self.nt_multiple) * self.nt_multiple
            }
        };
        if dur / nt as f64 * l0 > 0.5 {
            return Err(parameter("cell time step too large for the explicit driver (Δt·L0 > 1/2)"));
        }
        Ok(nt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSolution {
    pub kind: CellKind,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub dx: f64,
    /// Node offsets `x_j = −α + j·Δx`, `j = 0..=2·j_half`.
    pub xs: Vec<f64>,
    /// Rows `i = 0..=nt` at times `t0 + i·Δt` when kept.
    pub rows: Option<Vec<Vec<f64>>>,
    /// Value at `(t_n, 0)`.
    pub root: f64,
    /// Frozen barrier `h(t_n, π̂_n)`.
    pub barrier: f64,
    /// Largest `|min(AΓ − b, Γ − ĥ)|` over every implicit step.
    pub complementarity: f64,
    pub psor_iterations: usize,
    pub min_gap: f64,
}

impl CellSolution {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Linear interpolation of the kept grid at `(t, x)`.
    pub fn value_at(&self, t: f64, x: f64) -> Option<f64> {
        let rows = self.rows.as_ref()?;
        let fi = ((t - self.t0) / self.dt).clamp(0.0, self.nt as f64);
        let fj = ((x - self.xs[0]) / self.dx).clamp(0.0, (self.xs.len() - 1) as f64);
        let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(self.nt), (j0 + 1).min(self.xs.len() - 1));
        let (wi, wj) = (fi - i0 as f64, fj - j0 as f64);
        let row = |i: usize| rows[i][j0] * (1.0 - wj) + rows[i][j1] * wj;
        Some(row(i0) * (1.0 - wi) + row(i1) * wi)
    }
}

/// End time `(t_n + α) ∧ T` of the cell.
pub fn cell_end(cell: &FrozenCell, horizon: f64) -> f64 {
    (cell.t_n() + cell.alpha).min(horizon)
}

/// Solves the frozen cell problem backward from the top row. `boundary(t, x)`
/// supplies the values on the top row and on the lateral sides `x = ±α`.
pub fn solve_cell(
    data: &ProblemData,
    cell: &FrozenCell,
    kind: CellKind,
    mesh: &CellMesh,
    boundary: &(dyn Fn(f64, f64) -> f64 + Sync),
    keep: bool,
) -> Result<CellSolution> {
    data.require_dim(1)?;
    mesh.check()?;
    if let CellKind::Penalized { m } = kind {
        if !(m >= 0.0) {
            return Err(parameter("penalty must be nonnegative"));
        }
    }
    let t0 = cell.t_n();
    let t_end = cell_end(cell, data.horizon);
    if t_end - t0 <= TIME_EPS {
        return Err(parameter("cell starts at the horizon"));
    }
    let dur = t_end - t0;
    let jh = mesh.j_half;
    let nx = 2 * jh + 1;
    let dx = cell.alpha / jh as f64;
    let sigma_max = data.controls.max_vol();
    let nt = mesh.steps(dur, dx, sigma_max, data.l0)?;
    let dt = dur / nt as f64;
    let xs: Vec<f64> = (0..nx).map(|j| -cell.alpha + j as f64 * dx).collect();

    let st: PathState = cell.anchor_state();
    let h_hat = data.h(&st);
    let obstacle = matches!(kind, CellKind::Obstacle);
    let clip = |v: f64| if obstacle { v.max(h_hat) } else { v };

    let mut old: Vec<f64> = xs.iter().map(|&x| clip(boundary(t_end, x))).collect();
    let mut rows = keep.then(|| vec![Vec::new(); nt + 1]);
    let vols: Vec<f64> = (0..data.controls.len()).map(|k| data.controls.vol1(k)).collect();

    let mut a = vec![0.0; nx];
    let mut b = vec![0.0; nx];
    let mut c = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut new = vec![0.0; nx];
    let mut comp = 0.0f64;
    let mut iters = 0usize;
    let mut min_gap = f64::INFINITY;

    for i in (0..nt).rev() {
        if let Some(r) = rows.as_mut() {
            r[i + 1] = old.clone();
        }
        let t = t0 + i as f64 * dt;
        new[0] = clip(boundary(t, xs[0]));
        new[nx - 1] = clip(boundary(t, xs[nx - 1]));
        for j in 1..nx - 1 {
            let y = old[j];
            let z = (old[j + 1] - old[j - 1]) / (2.0 * dx);
            let g = (old[j + 1] - 2.0 * y + old[j - 1]) / (dx * dx);
            // Control sup from the old row; ties keep the lowest index.
            let (mut best, mut kb) = (f64::NEG_INFINITY, 0);
            for (k, v) in vols.iter().enumerate() {
                let val = 0.5 * v * v * g + data.f1(&st, y, z, k);
                if val > best {
                    best = val;
                    kb = k;
                }
            }
            let r = 0.5 * vols[kb] * vols[kb] * dt / (dx * dx);
            a[j] = -r;
            c[j] = -r;
            b[j] = 1.0 + 2.0 * r;
            rhs[j] = y + dt * data.f1(&st, y, z, kb);
            if let CellKind::Penalized { m } = kind {
                if y < h_hat {
                    b[j] += m * dt;
                    rhs[j] += m * dt * h_hat;
                }
            }
        }
        // Boundary columns enter the right-hand side.
        rhs[1] -= a[1] * new[0];
        rhs[nx - 2] -= c[nx - 2] * new[nx - 1];
        if obstacle {
            for j in 1..nx - 1 {
                new[j] = old[j].max(h_hat);
            }
            let (res, it) = psor(&a, &b, &c, &rhs, h_hat, &mut new, mesh)?;
            comp = comp.max(res);
            iters += it;
        } else {
            thomas(&a, &b, &c, &rhs, &mut new);
        }
        for v in &new {
            min_gap = min_gap.min(v - h_hat);
        }
        std::mem::swap(&mut old, &mut new);
    }
    if let Some(r) = rows.as_mut() {
        r[0] = old.clone();
    }
    Ok(CellSolution {
        kind,
        t0,
        dt,
        nt,
        dx,
        xs,
        rows,
        root: old[jh],
        barrier: h_hat,
        complementarity: comp,
        psor_iterations: iters,
        min_gap,
    })
}

/// Tridiagonal solve on the interior `1..n−1`; `a`, `c` are the sub and
/// super diagonals with the boundary couplings already moved to `rhs`.
fn thomas(a: &[f64], b: &[f64], c: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[1] = c[1] / b[1];
    dp[1] = rhs[1] / b[1];
    for j in 2..n - 1 {
        let den = b[j] - a[j] * cp[j - 1];
        cp[j] = c[j] / den;
        dp[j] = (rhs[j] - a[j] * dp[j - 1]) / den;
    }
    out[n - 2] = dp[n - 2];
    for j in (1..n - 2).rev() {
        out[j] = dp[j] - cp[j] * out[j + 1];
    }
}

/// Projected SOR for `min(Au − rhs, u − lower) = 0` on the interior.
/// Returns the final complementarity residual and the sweep count.
fn psor(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    rhs: &[f64],
    lower: f64,
    u: &mut [f64],
    mesh: &CellMesh,
) -> Result<(f64, usize)> {
    let n = b.len();
    let residual = |u: &[f64]| {
        let mut worst = 0.0f64;
        for j in 1..n - 1 {
            let left = if j > 1 { a[j] * u[j - 1] } else { 0.0 };
            let right = if j < n - 2 { c[j] * u[j + 1] } else { 0.0 };
            let au = left + b[j] * u[j] + right - rhs[j];
            worst = worst.max(au.min(u[j] - lower).abs());
        }
        worst
    };
    for it in 1..=mesh.psor_max_iter {
        for j in 1..n - 1 {
            let left = if j > 1 { a[j] * u[j - 1] } else { 0.0 };
            let right = if j < n - 2 { c[j] * u[j + 1] } else { 0.0 };
            let gs = (rhs[j] - left - right) / b[j];
            u[j] = (u[j] + mesh.psor_omega * (gs - u[j])).max(lower);
        }
        let res = residual(u);
        if res <= mesh.psor_tol {
            return Ok((res, it));
        }
    }
    Err(numeric(format!("PSOR did not converge in {} sweeps", mesh.psor_max_iter)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PathFunctionalSpec as P, ProblemSpec};
    use crate::path_space::Skeleton;

    fn spec(barrier: P, terminal: P) -> ProblemData {
        let mut s = ProblemSpec::preset("martingale-quadratic").unwrap();
        s.barrier = barrier;
        s.terminal = terminal;
        s.build().unwrap()
    }

    fn last_cell(alpha: f64) -> FrozenCell {
        FrozenCell::new(Skeleton::root(1.0 - alpha, 1), alpha).unwrap()
    }

    #[test]
    fn constant_terminal_gives_constant_cell() {
        let d = spec(P::Constant { value: 1.0 }, P::Constant { value: 2.0 });
        for kind in [CellKind::Penalized { m: 10.0 }, CellKind::Obstacle] {
            let s = solve_cell(&d, &last_cell(0.2), kind, &CellMesh::default(), &|_, _| 2.0, true).unwrap();
            for row in s.rows.as_ref().unwrap() {
                assert!(row.iter().all(|v| (v - 2.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn heat_solution_with_exact_boundary() {
        let d = spec(P::Constant { value: -10.0 }, P::Quadratic { coef: 1.0, time_coef: 0.0 });
        let cell = last_cell(0.4);
        let exact = |t: f64, x: f64| x * x + (1.0 - t);
        let s = solve_cell(&d, &cell, CellKind::Penalized { m: 256.0 }, &CellMesh::default(), &exact, true).unwrap();
        let rows = s.rows.as_ref().unwrap();
        let mut worst = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((v - exact(s.time(i), s.xs[j])).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn obstacle_constant_sits_on_barrier() {
        let d = spec(P::Constant { value: 1.5 }, P::Constant { value: 1.5 });
        let s = solve_cell(&d, &last_cell(0.2), CellKind::Obstacle, &CellMesh::default(), &|_, _| 1.5, true).unwrap();
        assert!(s.rows.unwrap().iter().flatten().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn obstacle_complementarity_and_ordering() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        let mut s = ProblemSpec::preset("abs-stopping").unwrap();
        s.barrier = P::Constant { value: 0.3 };
        let d2 = s.build().unwrap();
        let cell = last_cell(0.4);
        let b = |_: f64, x: f64| x.abs();
        let mesh = CellMesh::default();
        for data in [&d, &d2] {
            let g = solve_cell(data, &cell, CellKind::Obstacle, &mesh, &b, true).unwrap();
            assert!(g.min_gap >= -1e-12 && g.complementarity <= 1e-8);
            for m in [1.0, 16.0, 256.0] {
                let th = solve_cell(data, &cell, CellKind::Penalized { m }, &mesh, &b, true).unwrap();
                let (tr, gr) = (th.rows.unwrap(), g.rows.as_ref().unwrap());
                for (x, y) in tr.iter().flatten().zip(gr.iter().flatten()) {
                    // PSOR stops at residual 1e-8 per step, so errors add up over the steps.
                    assert!(x <= &(y + g.nt as f64 * 1e-8), "m={m} θ={x} Γ={y} h={}", g.barrier);
                }
            }
        }
    }

    #[test]
    fn penalty_limit_matches_obstacle_when_barrier_is_far_below() {
        let d = spec(P::Constant { value: -10.0 }, P::Abs { coef: 1.0 });
        let cell = last_cell(0.4);
        let b = |_: f64, x: f64| x.abs();
        let mesh = CellMesh::default();
        let g = solve_cell(&d, &cell, CellKind::Obstacle, &mesh, &b, true).unwrap();
        let th = solve_cell(&d, &cell, CellKind::Penalized { m: 256.0 }, &mesh, &b, true).unwrap();
        let gap = g
            .rows
            .unwrap()
            .iter()
            .flatten()
            .zip(th.rows.unwrap().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 5e-3, "{gap}");
    }

    #[test]
    fn cfl_violation_is_a_parameter_error() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        let mesh = CellMesh { nt: Some(2), ..CellMesh::default() };
        let e = solve_cell(&d, &last_cell(0.2), CellKind::Obstacle, &mesh, &|_, x| x.abs(), false).unwrap_err();
        assert_eq!(e.kind(), "parameter");
    }

    #[test]
    fn top_row_is_the_boundary() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        let s = solve_cell(
            &d,
            &last_cell(0.2),
            CellKind::Penalized { m: 4.0 },
            &CellMesh::default(),
            &|_, x| 1.0 + x,
            true,
        )
        .unwrap();
        let rows = s.rows.unwrap();
        for (v, x) in rows[s.nt].iter().zip(&s.xs) {
            assert!((v - (1.0 + x)).abs() < 1e-15);
        }
    }
}
