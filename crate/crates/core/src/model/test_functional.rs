use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Polynomial test functional `φ(t, x) = Σ c·t^i·x^j` of degree at most 4 in
/// the current value, with closed-form partials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctional {
    terms: Vec<(f64, u32, u32)>,
}

pub const MAX_X_DEGREE: u32 = 4;

fn mono(c: f64, i: u32, j: u32, t: f64, x: f64) -> f64 {
    c * t.powi(i as i32) * x.powi(j as i32)
}

impl TestFunctional {
    /// Terms are `(coefficient, power of t, power of x)`.
    pub fn new(terms: Vec<(f64, u32, u32)>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.2 > MAX_X_DEGREE) {
            return Err(domain(format!("x-degree {} exceeds {MAX_X_DEGREE}", t.2)));
        }
        Ok(Self { terms })
    }

    /// `a + b·(x − x0) + ½c·(x − x0)² + e·(t − t0)`, expanded.
    pub fn quadratic_at(t0: f64, x0: f64, a: f64, b: f64, c: f64, e: f64) -> Self {
        let terms =
            vec![(a - b * x0 + 0.5 * c * x0 * x0 - e * t0, 0, 0), (b - c * x0, 0, 1), (0.5 * c, 0, 2), (e, 1, 0)];
        Self { terms }
    }

    pub fn terms(&self) -> &[(f64, u32, u32)] {
        &self.terms
    }

    /// `φ + s` for a constant `s`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.push((s, 0, 0));
        Self { terms }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.terms.iter().map(|&(c, i, j)| mono(c, i, j, t, x)).sum()
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.terms.iter().filter(|tm| tm.1 > 0).map(|&(c, i, j)| mono(c * i as f64, i - 1, j, t, x)).sum()
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.terms.iter().filter(|tm| tm.2 > 0).map(|&(c, i, j)| mono(c * j as f64, i, j - 1, t, x)).sum()
    }

    pub fn dxx(&self, t: f64, x: f64) -> f64 {
        self.terms.iter().filter(|tm| tm.2 > 1).map(|&(c, i, j)| mono(c * (j * (j - 1)) as f64, i, j - 2, t, x)).sum()
    }
}
