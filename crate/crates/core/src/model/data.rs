use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::path_space::PathState;

/// Generator `F(t, ω, y, z, k)`; `z` is already multiplied by `σ(k)`.
pub type DriverFn = Arc<dyn Fn(&PathState, f64, &[f64], usize) -> f64 + Send + Sync>;
/// Barrier `h(t, ω)` or terminal `ξ(ω)` read through path features.
pub type PathFn = Arc<dyn Fn(&PathState) -> f64 + Send + Sync>;

/// Modulus `ρ(r) = c·r^β + c·r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub c: f64,
    pub beta: f64,
}

impl Modulus {
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        self.c * r.powf(self.beta) + self.c * r
    }
}

impl Default for Modulus {
    fn default() -> Self {
        Self { c: 1.0, beta: 0.5 }
    }
}

/// Finite control set: one volatility matrix per control index.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    sigma: Vec<DMatrix<f64>>,
    sigma_sq: Vec<DMatrix<f64>>,
}

impl Controls {
    pub fn new(sigma: Vec<DMatrix<f64>>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(domain("the control set is empty"));
        }
        let d = sigma[0].nrows();
        if sigma.iter().any(|s| s.nrows() != d || s.ncols() != d) {
            return Err(domain("volatility matrices must all be square of the same size"));
        }
        let sigma_sq = sigma.iter().map(|s| s * s.transpose()).collect();
        Ok(Self { sigma, sigma_sq })
    }

    /// One-dimensional controls from a list of scalar volatilities.
    pub fn scalar(vols: &[f64]) -> Result<Self> {
        Self::new(vols.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect())
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sigma[0].nrows()
    }

    pub fn sigma(&self, k: usize) -> &DMatrix<f64> {
        &self.sigma[k]
    }

    /// `σ(k)σ(k)ᵀ`.
    pub fn sigma_sq(&self, k: usize) -> &DMatrix<f64> {
        &self.sigma_sq[k]
    }

    /// Scalar volatility of control `k` in dimension one.
    #[inline]
    pub fn vol1(&self, k: usize) -> f64 {
        self.sigma[k][(0, 0)]
    }

    /// Largest operator norm over the control set.
    pub fn max_vol(&self) -> f64 {
        self.sigma.iter().map(|s| s.clone().singular_values().max()).fold(0.0, f64::max)
    }

    /// `σ(k)ᵀ z`.
    pub fn apply_t(&self, k: usize, z: &[f64], out: &mut [f64]) {
        let s = &self.sigma[k];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..z.len()).map(|i| s[(i, j)] * z[i]).sum();
        }
    }
}

/// Problem data `(K, σ, F, h, ξ)` with the standing constants.
#[derive(Clone)]
pub struct ProblemData {
    pub name: String,
    pub horizon: f64,
    pub controls: Controls,
    pub driver: DriverFn,
    pub barrier: PathFn,
    pub terminal: PathFn,
    pub m0: f64,
    pub l0: f64,
    pub rho0: Modulus,
    pub c0: f64,
    /// False when `F`, `h` and `ξ` read only `(t, x)`; lets solvers drop
    /// running extrema from cache keys and regression bases.
    pub path_dependent: bool,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("controls", &self.controls.len())
            .field("m0", &self.m0)
            .field("l0", &self.l0)
            .field("rho0", &self.rho0)
            .field("c0", &self.c0)
            .finish()
    }
}

impl ProblemData {
    pub fn dim(&self) -> usize {
        self.controls.dim()
    }

    #[inline]
    pub fn f(&self, st: &PathState, y: f64, sz: &[f64], k: usize) -> f64 {
        (self.driver)(st, y, sz, k)
    }

    #[inline]
    pub fn h(&self, st: &PathState) -> f64 {
        (self.barrier)(st)
    }

    #[inline]
    pub fn xi(&self, st: &PathState) -> f64 {
        (self.terminal)(st)
    }

    /// Scalar driver in dimension one: `F(st, y, σ_k z, k)`.
    #[inline]
    pub fn f1(&self, st: &PathState, y: f64, z: f64, k: usize) -> f64 {
        let sz = [self.controls.vol1(k) * z];
        (self.driver)(st, y, &sz, k)
    }

    /// Bound on `|u⁰|` from the boundedness and Lipschitz constants:
    /// `e^{L0·T}·M0·(1 + T)`.
    pub fn value_bound(&self) -> f64 {
        (self.l0 * self.horizon).exp() * self.m0 * (1.0 + self.horizon)
    }

    pub fn require_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(domain(format!("this solver needs dimension {d}, the problem has {}", self.dim())));
        }
        Ok(())
    }

    /// Same data with a different control set.
    pub fn with_controls(&self, controls: Controls) -> Self {
        Self { controls, ..self.clone() }
    }
}
