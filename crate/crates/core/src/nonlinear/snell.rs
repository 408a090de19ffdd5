use std::io::Write;

use serde::Serialize;

use super::lattice::Lattice;
use crate::error::Result;

/// Which nodes may or must stop.
pub enum StopRule<'a> {
    /// Stop anywhere (optimal stopping), and always from `cap` on.
    Optional { cap: Option<f64> },
    /// Stopping is optional everywhere and forced on the given set.
    OptionalAndForced(&'a dyn Fn(usize, f64) -> bool),
    /// No voluntary stopping; stop exactly on the given set or at the horizon.
    ForcedOnly(&'a dyn Fn(usize, f64) -> bool),
}

/// Envelope `Y`, continuation value and stopping set on the lattice.
/// Row `i` holds the nodes `j = −i..=i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnellResult {
    pub value: f64,
    pub envelope: Vec<Vec<f64>>,
    pub reward: Vec<Vec<f64>>,
    pub continuation: Vec<Vec<f64>>,
    /// `true` where `τ*` stops: the envelope meets the reward (or stopping
    /// is forced).
    pub stop: Vec<Vec<bool>>,
    pub action: Vec<Vec<usize>>,
}

/// Upper nonlinear Snell envelope `Y_i = max(X_i, max_a E_a[Y_{i+1}])` of the
/// reward `X(i, x)`; `stop_cap` forces stopping from that time on.
pub fn snell_upper(lat: &Lattice, reward: &dyn Fn(usize, f64) -> f64, stop_cap: Option<f64>) -> SnellResult {
    snell_general(lat, reward, StopRule::Optional { cap: stop_cap }, true)
}

pub fn snell_general(
    lat: &Lattice,
    reward: &dyn Fn(usize, f64) -> f64,
    rule: StopRule<'_>,
    upper: bool,
) -> SnellResult {
    let n = lat.n_steps;
    let mut envelope = vec![Vec::new(); n + 1];
    let mut rewards = vec![Vec::new(); n + 1];
    let mut continuation = vec![Vec::new(); n + 1];
    let mut stop = vec![Vec::new(); n + 1];
    let mut action = vec![Vec::new(); n + 1];
    for i in 0..=n {
        rewards[i] = (0..Lattice::width(i)).map(|o| reward(i, lat.x(o as i64 - i as i64))).collect();
    }
    envelope[n] = rewards[n].clone();
    continuation[n] = rewards[n].clone();
    stop[n] = vec![true; Lattice::width(n)];
    action[n] = vec![0; Lattice::width(n)];
    for i in (0..n).rev() {
        let w = Lattice::width(i);
        let mut cont = vec![0.0; w];
        let mut arg = vec![0usize; w];
        lat.backward(i, &envelope[i + 1], &mut cont, &mut arg, upper);
        let mut y = vec![0.0; w];
        let mut s = vec![false; w];
        for o in 0..w {
            let x = lat.x(o as i64 - i as i64);
            let r = rewards[i][o];
            let (forced, optional) = match &rule {
                StopRule::Optional { cap } => (cap.is_some_and(|c| lat.time(i) >= c - 1e-12), true),
                StopRule::OptionalAndForced(f) => (f(i, x), true),
                StopRule::ForcedOnly(f) => (f(i, x), false),
            };
            let better = if upper { r >= cont[o] } else { r <= cont[o] };
            s[o] = forced || (optional && better);
            y[o] = if s[o] { r } else { cont[o] };
        }
        envelope[i] = y;
        continuation[i] = cont;
        stop[i] = s;
        action[i] = arg;
    }
    SnellResult { value: envelope[0][0], envelope, reward: rewards, continuation, stop, action }
}

/// Worst violations of the one-step relations of an upper envelope:
/// supermartingale `Y_i ≥ max_a E_a[Y_{i+1}]` everywhere and equality on the
/// continuation region before `τ*`. Both are `≤ 0` up to rounding when the
/// envelope is exact.
pub fn snell_one_step_checks(lat: &Lattice, res: &SnellResult) -> (f64, f64) {
    let mut worst_super: f64 = f64::NEG_INFINITY;
    let mut worst_mart: f64 = 0.0;
    for i in 0..lat.n_steps {
        let w = Lattice::width(i);
        let mut cont = vec![0.0; w];
        let mut arg = vec![0usize; w];
        lat.backward(i, &res.envelope[i + 1], &mut cont, &mut arg, true);
        for o in 0..w {
            worst_super = worst_super.max(cont[o] - res.envelope[i][o]);
            if !res.stop[i][o] {
                worst_mart = worst_mart.max((cont[o] - res.envelope[i][o]).abs());
            }
        }
    }
    (worst_super.max(0.0), worst_mart)
}

impl SnellResult {
    /// CSV rows `step, time, x, reward, envelope, stop`.
    pub fn write_csv<W: Write>(&self, lat: &Lattice, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "time", "x", "reward", "envelope", "stop"])?;
        for i in 0..self.envelope.len() {
            for o in 0..self.envelope[i].len() {
                wtr.write_record([
                    i.to_string(),
                    format!("{}", lat.time(i)),
                    format!("{}", lat.x(o as i64 - i as i64)),
                    format!("{}", self.reward[i][o]),
                    format!("{}", self.envelope[i][o]),
                    (self.stop[i][o] as u8).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
