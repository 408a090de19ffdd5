use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};

/// Drift and volatility of one lattice action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub drift: f64,
    pub vol: f64,
}

/// Recombining trinomial lattice `x = j·dx`, `|j| ≤ i` at step `i`, with an
/// upwind stencil per action:
/// `p_up = b²dt/(2dx²) + a⁺dt/dx`, `p_dn = b²dt/(2dx²) + a⁻dt/dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub t0: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub dx: f64,
    pub l: f64,
    pub actions: Vec<Action>,
    probs: Vec<[f64; 3]>,
}

const BOUND_EPS: f64 = 1e-12;

impl Lattice {
    /// Builds a lattice; `dx = None` picks the smallest spacing that keeps
    /// every stencil nonnegative.
    pub fn new(t0: f64, horizon: f64, n_steps: usize, l: f64, actions: Vec<Action>, dx: Option<f64>) -> Result<Self> {
        if n_steps == 0 || !(horizon > t0) {
            return Err(parameter("lattice needs at least one step over a positive span"));
        }
        if actions.is_empty() {
            return Err(parameter("lattice needs at least one action"));
        }
        for a in &actions {
            if a.drift.abs() > l + BOUND_EPS || 0.5 * a.vol * a.vol > l + BOUND_EPS || a.vol < 0.0 {
                return Err(parameter(format!(
                    "action (drift {}, vol {}) exceeds the bounds |a| ≤ {l}, b²/2 ≤ {l}",
                    a.drift, a.vol
                )));
            }
        }
        let dt = (horizon - t0) / n_steps as f64;
        let dx = match dx {
            Some(dx) => dx,
            None => Self::min_dx(dt, &actions),
        };
        if !(dx > 0.0) {
            return Err(parameter("lattice spacing must be positive (all actions are degenerate)"));
        }
        let mut probs = Vec::with_capacity(actions.len());
        for a in &actions {
            let diff = a.vol * a.vol * dt / (2.0 * dx * dx);
            let up = diff + a.drift.max(0.0) * dt / dx;
            let dn = diff + (-a.drift).max(0.0) * dt / dx;
            if up + dn > 1.0 + 1e-12 {
                return Err(parameter(format!(
                    "CFL violated for action (drift {}, vol {}): b²dt/dx² + |a|dt/dx = {} > 1",
                    a.drift,
                    a.vol,
                    up + dn
                )));
            }
            probs.push([dn, (1.0 - up - dn).max(0.0), up]);
        }
        Ok(Self { t0, horizon, n_steps, dt, dx, l, actions, probs })
    }

    /// Vertices of the action box: drift in `{−L, 0, L}`, volatility in
    /// `{c0, √(2L)}`. Functionals of the stencil are affine in `(a±, b²)`, so
    /// these attain the sup over the whole box.
    pub fn default_actions(l: f64, c0: f64) -> Vec<Action> {
        let top = (2.0 * l).sqrt();
        let mut vols = vec![c0.min(top)];
        if (top - vols[0]).abs() > 1e-15 {
            vols.push(top);
        }
        let drifts: Vec<f64> = if l > 0.0 { vec![-l, 0.0, l] } else { vec![0.0] };
        let mut out = Vec::new();
        for &vol in &vols {
            for &drift in &drifts {
                out.push(Action { drift, vol });
            }
        }
        out
    }

    /// Lattice with the default action vertices.
    pub fn standard(t0: f64, horizon: f64, n_steps: usize, l: f64, c0: f64, dx: Option<f64>) -> Result<Self> {
        Self::new(t0, horizon, n_steps, l, Self::default_actions(l, c0), dx)
    }

    /// Smallest `dx` with `b²dt/dx² + |a|dt/dx ≤ 1` for every action.
    pub fn min_dx(dt: f64, actions: &[Action]) -> f64 {
        actions
            .iter()
            .map(|a| {
                let ad = a.drift.abs() * dt;
                0.5 * (ad + (ad * ad + 4.0 * a.vol * a.vol * dt).sqrt())
            })
            .fold(0.0, f64::max)
    }

    /// `[p_down, p_mid, p_up]` of action `a`.
    #[inline]
    pub fn probs(&self, a: usize) -> [f64; 3] {
        self.probs[a]
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Displacement of node `j ∈ [−i, i]`.
    #[inline]
    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.dx
    }

    /// Nodes of step `i` are stored at offsets `0..=2i` (offset `o` is
    /// `j = o − i`).
    #[inline]
    pub fn width(i: usize) -> usize {
        2 * i + 1
    }

    /// One backward step: `out[o] = ext_a Σ p·next` over actions, where
    /// `next` holds step `i + 1`. Returns nothing; `arg` receives the chosen
    /// action (ties to the lowest index).
    pub(crate) fn backward(&self, i: usize, next: &[f64], out: &mut [f64], arg: &mut [usize], upper: bool) {
        debug_assert_eq!(next.len(), Self::width(i + 1));
        for o in 0..Self::width(i) {
            // Node j = o − i at step i maps to offset o + 1 at step i + 1.
            let (dn, mid, up) = (next[o], next[o + 1], next[o + 2]);
            let mut best = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
            let mut best_a = 0;
            for (a, p) in self.probs.iter().enumerate() {
                let v = p[0] * dn + p[1] * mid + p[2] * up;
                if (upper && v > best) || (!upper && v < best) {
                    best = v;
                    best_a = a;
                }
            }
            out[o] = best;
            arg[o] = best_a;
        }
    }
}
