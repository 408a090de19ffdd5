use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::data::{Modulus, ProblemData};
use crate::path_space::PathState;

/// Parameters of the change of unknown `u′ = e^{λt}u + C·e^{μt}·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { lambda: 0.0, mu: 0.0, c: 0.0 };

    /// `λ = L0 + 1`, `μ = 0`, `C = −2·e^{(L0+1)T}·(λ + 1)·(M0 + 1)`. With these the
    /// transformed generator is strictly decreasing in `y` with slope at most
    /// −1 and nonnegative on the barrier at `z = 0`.
    pub fn standard(data: &ProblemData) -> Self {
        let lambda = data.l0 + 1.0;
        let c = -2.0 * (lambda * data.horizon).exp() * (lambda + 1.0) * (data.m0 + 1.0);
        Self { lambda, mu: 0.0, c }
    }

    /// `u′(t) = e^{λt}·u + C·e^{μt}·t`.
    pub fn forward(&self, t: f64, u: f64) -> f64 {
        (self.lambda * t).exp() * u + self.c * (self.mu * t).exp() * t
    }

    /// `u = e^{−λt}·(u′ − C·e^{μt}·t)`.
    pub fn back(&self, t: f64, u_prime: f64) -> f64 {
        (-self.lambda * t).exp() * (u_prime - self.c * (self.mu * t).exp() * t)
    }
}

/// Transformed data `(F′, h′, ξ′)` solving the PPDE for `u′` when `u` solves
/// the original one.
pub fn change_of_variable(data: &ProblemData, tr: Transform) -> ProblemData {
    let Transform { lambda, mu, c } = tr;
    let horizon = data.horizon;
    let f = data.driver.clone();
    let h = data.barrier.clone();
    let xi = data.terminal.clone();

    let driver = Arc::new(move |st: &PathState, y: f64, z: &[f64], k: usize| {
        let t = st.t;
        let el = (lambda * t).exp();
        let inner_y = (y - c * (mu * t).exp() * t) / el;
        let inner_z: smallvec::SmallVec<[f64; 4]> = z.iter().map(|v| v / el).collect();
        el * f(st, inner_y, &inner_z, k) - c * (mu * t).exp() * (1.0 + (mu - lambda) * t) - lambda * y
    });
    let barrier = Arc::new(move |st: &PathState| (lambda * st.t).exp() * h(st) + c * (mu * st.t).exp() * st.t);
    let terminal =
        Arc::new(move |st: &PathState| (lambda * horizon).exp() * xi(st) + c * (mu * horizon).exp() * horizon);

    let grow = (lambda.abs() * horizon).exp();
    let cshift = c.abs() * (mu.abs() * horizon).exp();
    let m0 = (grow * (data.m0 + data.l0 * cshift * horizon) + cshift * (1.0 + (mu - lambda).abs() * horizon))
        .max(grow * data.m0 + cshift * horizon);
    ProblemData {
        name: format!("{}-transformed", data.name),
        driver,
        barrier,
        terminal,
        m0,
        l0: data.l0 + lambda.abs(),
        rho0: Modulus { c: grow * data.rho0.c + cshift * (1.0 + mu.abs() * horizon), beta: data.rho0.beta },
        ..data.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemSpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_parameters_change_nothing() {
        let d = ProblemSpec::preset("american-put").unwrap().build().unwrap();
        let t = change_of_variable(&d, Transform::IDENTITY);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let st = PathState::scalar(rng.random::<f64>(), rng.random_range(-1.0..1.0), 1.0, -1.0);
            let (y, z) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            assert_eq!(t.f1(&st, y, z, 0), d.f1(&st, y, z, 0));
            assert_eq!(t.h(&st), d.h(&st));
            assert_eq!(t.xi(&st), d.xi(&st));
        }
    }

    #[test]
    fn pure_exponential_scaling() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        let t = change_of_variable(&d, Transform { lambda: 1.0, mu: 0.0, c: 0.0 });
        let st = PathState::scalar(0.4, -0.3, 0.0, -0.3);
        assert_abs_diff_eq!(t.h(&st), 0.4f64.exp() * 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(t.xi(&st), 1f64.exp() * 0.3, epsilon = 1e-14);
    }

    #[test]
    fn forward_and_back_are_inverse() {
        let tr = Transform { lambda: 1.5, mu: 0.2, c: -40.0 };
        for i in 0..10 {
            let t = 0.1 * i as f64;
            assert_abs_diff_eq!(tr.back(t, tr.forward(t, 0.37)), 0.37, epsilon = 1e-12);
        }
        assert_eq!(tr.back(0.0, 2.0), 2.0);
    }
}
