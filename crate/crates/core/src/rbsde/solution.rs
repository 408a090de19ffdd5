use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How the driver enters the one-step backward equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriverMode {
    /// `y = E[Y_{i+1}] + F(y, z)·dt`, solved by fixed point.
    #[default]
    Implicit,
    /// `y = E[Y_{i+1}] + F(E[Y_{i+1}], z)·dt`.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScheme {
    /// Penalty solved exactly in the one-step equation; stable for every `m`.
    #[default]
    Implicit,
    /// Penalty from the continuation value; needs `dt·(L0 + m) ≤ 1`.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub m: f64,
    #[serde(default)]
    pub scheme: PenaltyScheme,
}

/// Storage layout of the per-step arrays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Layout {
    /// Row `i` holds tree nodes `j = −i..=i` at `x0 + j·dx`.
    Tree { x0: f64, dx: f64 },
    /// Row `i` holds one entry per simulated path.
    Paths { n_paths: usize },
}

/// Per-step aggregates kept for every solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub time: f64,
    pub mean_y: f64,
    pub mean_k: f64,
    /// Fraction of nodes or paths where the reflection acted.
    pub barrier_active: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbsdeSolution {
    pub y0: f64,
    pub std_error: f64,
    pub kind: String,
    pub penalty: Option<f64>,
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub layout: Layout,
    /// Grids indexed `[step][node or path]`; empty when not retained.
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Reflection increment applied at each step (`K_{i+1} − K_i` for
    /// `i < N`, terminal correction at `N`).
    pub dk: Vec<Vec<f64>>,
    pub barrier: Vec<Vec<f64>>,
    /// Maximizing control per node (tree) or control used (paths).
    pub control: Vec<Vec<usize>>,
    pub summary: Vec<StepSummary>,
    pub warnings: Vec<String>,
}

impl RbsdeSolution {
    pub fn has_grids(&self) -> bool {
        !self.y.is_empty()
    }

    /// Tree value at node `j` of step `i`.
    pub fn tree_node(&self, i: usize, j: i64) -> f64 {
        self.y[i][(j + i as i64) as usize]
    }

    /// Linear interpolation of the tree grid at `(t, x)`; time snaps to the
    /// nearest step.
    pub fn tree_value_at(&self, t: f64, x: f64) -> Option<f64> {
        let Layout::Tree { x0, dx } = self.layout else { return None };
        if !self.has_grids() {
            return None;
        }
        let i = (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.n_steps);
        let pos = (x - x0) / dx;
        let lo = pos.floor().clamp(-(i as f64), i as f64);
        let hi = (lo + 1.0).min(i as f64);
        let (jl, jh) = (lo as i64, hi as i64);
        let w = (pos - lo).clamp(0.0, 1.0);
        Some(if jl == jh {
            self.tree_node(i, jl)
        } else {
            (1.0 - w) * self.tree_node(i, jl) + w * self.tree_node(i, jh)
        })
    }

    /// CSV rows `step, time, mean_y, mean_k, barrier_active`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.summary {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-step aggregates accumulated during a backward pass.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RowStats {
    pub mean_y: f64,
    pub mean_dk: f64,
    pub active: f64,
}

impl RowStats {
    pub fn of(y: &[f64], dk: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        Self {
            mean_y: y.iter().sum::<f64>() / n,
            mean_dk: dk.iter().sum::<f64>() / n,
            active: dk.iter().filter(|d| **d > 0.0).count() as f64 / n,
        }
    }
}

/// Turns rows stored in step order into summaries with cumulative `K`.
pub(crate) fn summarize(t0: f64, dt: f64, rows: &[RowStats]) -> Vec<StepSummary> {
    let mut k = 0.0;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let s = StepSummary {
                step: i,
                time: t0 + i as f64 * dt,
                mean_y: r.mean_y,
                mean_k: k,
                barrier_active: r.active,
            };
            k += r.mean_dk;
            s
        })
        .collect()
}
