use std::sync::Arc;

use crate::error::{parameter, Result};
use crate::model::ProblemData;
use crate::path_space::PathState;

pub type TimeSpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// One-dimensional Markovian obstacle problem:
/// `min{−u_t − max_k ½σ_k²u_xx + r·u, u − h(t, x)} = 0`, `u(T, x) = ξ(x)`.
#[derive(Clone)]
pub struct MarkovianSpec {
    pub horizon: f64,
    pub vols: Vec<f64>,
    pub rate: f64,
    pub barrier: TimeSpaceFn,
    pub terminal: TimeSpaceFn,
}

impl MarkovianSpec {
    pub fn american_put(s0: f64, strike: f64, rate: f64, vol: f64, horizon: f64) -> Self {
        let payoff = Arc::new(move |t: f64, x: f64| (strike - s0 * ((rate - 0.5 * vol * vol) * t + x).exp()).max(0.0));
        Self { horizon, vols: vec![vol], rate, barrier: payoff.clone(), terminal: payoff }
    }

    /// Reads a problem whose data depend on the path only through `(t, x)` and
    /// whose generator is `−rate·y`.
    pub fn from_problem(data: &ProblemData, rate: f64) -> Result<Self> {
        if data.dim() != 1 || data.path_dependent {
            return Err(parameter("the Markovian reduction needs one-dimensional (t, x) data"));
        }
        let h = data.barrier.clone();
        let xi = data.terminal.clone();
        let horizon = data.horizon;
        Ok(Self {
            horizon,
            vols: (0..data.controls.len()).map(|k| data.controls.vol1(k)).collect(),
            rate,
            barrier: Arc::new(move |t, x| h(&PathState::scalar(t, x, x, x))),
            terminal: Arc::new(move |_, x| xi(&PathState::scalar(horizon, x, x, x))),
        })
    }
}
