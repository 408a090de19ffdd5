use serde::{Deserialize, Serialize};

use super::markov::MarkovianSpec;
use crate::error::{numeric, parameter, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdMesh {
    /// Number of space nodes (forced odd so that `x = 0` is a node).
    pub nx: usize,
    pub nt: usize,
    /// Half-width of the space domain in units of `σ_max·√T`.
    pub half_width: f64,
    pub psor_tol: f64,
    pub psor_max_iter: usize,
}

impl Default for FdMesh {
    fn default() -> Self {
        Self { nx: 801, nt: 400, half_width: 6.0, psor_tol: 1e-10, psor_max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub xs: Vec<f64>,
    /// Values at the initial time.
    pub values: Vec<f64>,
    pub root: f64,
    pub max_psor_iter: usize,
}

/// Projected SOR for a tridiagonal system `A u = b`, `u ≥ g`.
#[allow(clippy::too_many_arguments)]
fn psor(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    b: &[f64],
    g: &[f64],
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = u.len();
    let omega = 1.4;
    for it in 1..=max_iter {
        let mut change: f64 = 0.0;
        for i in 1..n - 1 {
            let gs = (b[i] - lower[i] * u[i - 1] - upper[i] * u[i + 1]) / diag[i];
            let next = (u[i] + omega * (gs - u[i])).max(g[i]);
            change = change.max((next - u[i]).abs());
            u[i] = next;
        }
        if change <= tol * (1.0 + u[n / 2].abs()) {
            return Ok(it);
        }
    }
    Err(numeric(format!("PSOR did not converge in {max_iter} iterations")))
}

/// Crank–Nicolson with two implicit start-up steps, projected SOR for the
/// obstacle, Dirichlet sides at `max(h, e^{−r(T−t)}ξ)`.
pub fn fd_variational_inequality(spec: &MarkovianSpec, mesh: &FdMesh) -> Result<FdSolution> {
    if mesh.nx < 5 || mesh.nt < 2 {
        return Err(parameter("FD mesh needs at least 5 space nodes and 2 steps"));
    }
    let nx = mesh.nx | 1;
    let vmax = spec.vols.iter().cloned().fold(0.0, f64::max);
    let width = mesh.half_width * vmax.max(1e-3) * spec.horizon.sqrt();
    let dx = 2.0 * width / (nx - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|i| -width + i as f64 * dx).collect();
    let dt = spec.horizon / mesh.nt as f64;
    let r = spec.rate;

    let mut u: Vec<f64> = xs.iter().map(|&x| (spec.terminal)(spec.horizon, x)).collect();
    let mut lower = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut g = vec![0.0; nx];
    let mut max_iter = 0;

    // Sub-steps: (time step, implicitness) from the horizon backwards.
    let mut steps = Vec::new();
    for n in 0..mesh.nt {
        if n < 2 {
            steps.push((0.5 * dt, 1.0));
            steps.push((0.5 * dt, 1.0));
        } else {
            steps.push((dt, 0.5));
        }
    }
    let smax2 = spec.vols.iter().map(|v| v * v).fold(f64::NEG_INFINITY, f64::max);
    let smin2 = spec.vols.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let mut t = spec.horizon;
    for (h, theta) in steps {
        let t_new = t - h;
        // Control choice per node from the current iterate (exact for one vol).
        for i in 1..nx - 1 {
            let uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            let s2 = if uxx >= 0.0 { smax2 } else { smin2 };
            let a = 0.5 * s2 / (dx * dx);
            // (Au)_i = a·u_{i−1} − (2a + r)·u_i + a·u_{i+1}
            let au = a * (u[i - 1] + u[i + 1]) - (2.0 * a + r) * u[i];
            rhs[i] = u[i] + (1.0 - theta) * h * au;
            lower[i] = -theta * h * a;
            upper[i] = -theta * h * a;
            diag[i] = 1.0 + theta * h * (2.0 * a + r);
        }
        for (i, &x) in xs.iter().enumerate() {
            g[i] = (spec.barrier)(t_new, x);
        }
        let edge = |x: f64| {
            (spec.barrier)(t_new, x).max((-r * (spec.horizon - t_new)).exp() * (spec.terminal)(spec.horizon, x))
        };
        u[0] = edge(xs[0]);
        u[nx - 1] = edge(xs[nx - 1]);
        for i in 1..nx - 1 {
            u[i] = u[i].max(g[i]);
        }
        let it = psor(&lower, &diag, &upper, &rhs, &g, &mut u, mesh.psor_tol, mesh.psor_max_iter)?;
        max_iter = max_iter.max(it);
        t = t_new;
    }
    let root = u[nx / 2];
    if !root.is_finite() {
        return Err(numeric("FD solution is not finite"));
    }
    Ok(FdSolution { xs, values: u, root, max_psor_iter: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::binomial_american;
    use std::sync::Arc;

    #[test]
    fn heat_moment() {
        let spec = MarkovianSpec {
            horizon: 1.0,
            vols: vec![1.0],
            rate: 0.0,
            barrier: Arc::new(|_, _| -10.0),
            terminal: Arc::new(|_, x| x * x),
        };
        let s = fd_variational_inequality(&spec, &FdMesh::default()).unwrap();
        assert!((s.root - 1.0).abs() < 1e-3, "{}", s.root);
    }

    #[test]
    fn constant_obstacle() {
        let spec = MarkovianSpec {
            horizon: 1.0,
            vols: vec![0.7],
            rate: 0.0,
            barrier: Arc::new(|_, _| 2.5),
            terminal: Arc::new(|_, _| 2.5),
        };
        let s = fd_variational_inequality(&spec, &FdMesh { nx: 101, nt: 50, ..FdMesh::default() }).unwrap();
        assert!(s.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn put_agrees_with_binomial() {
        let spec = MarkovianSpec::american_put(36.0, 40.0, 0.06, 0.2, 1.0);
        let fd = fd_variational_inequality(&spec, &FdMesh::default()).unwrap().root;
        let bin = binomial_american(&spec, 2000).unwrap();
        assert!(((fd - bin) / bin).abs() < 5e-3, "fd {fd} binomial {bin}");
    }
}
