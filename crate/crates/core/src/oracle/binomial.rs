use super::markov::MarkovianSpec;
use crate::error::{parameter, Result};

/// Backward induction on the equal-probability binomial tree
/// `x ± σ√dt` with discount `e^{−r·dt}`.
pub fn binomial_american(spec: &MarkovianSpec, n_steps: usize) -> Result<f64> {
    if spec.vols.len() != 1 {
        return Err(parameter("the binomial oracle takes a single control"));
    }
    if n_steps == 0 {
        return Err(parameter("the binomial oracle needs at least one step"));
    }
    let dt = spec.horizon / n_steps as f64;
    let dx = spec.vols[0] * dt.sqrt();
    let disc = (-spec.rate * dt).exp();
    // Node j at step i sits at (2j − i)·dx.
    let mut v: Vec<f64> =
        (0..=n_steps).map(|j| (spec.terminal)(spec.horizon, (2.0 * j as f64 - n_steps as f64) * dx)).collect();
    for i in (0..n_steps).rev() {
        let t = i as f64 * dt;
        for j in 0..=i {
            let cont = disc * 0.5 * (v[j] + v[j + 1]);
            let x = (2.0 * j as f64 - i as f64) * dx;
            v[j] = cont.max((spec.barrier)(t, x));
        }
    }
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn spec(h: f64, xi: f64) -> MarkovianSpec {
        MarkovianSpec {
            horizon: 1.0,
            vols: vec![0.3],
            rate: 0.05,
            barrier: Arc::new(move |_, _| h),
            terminal: Arc::new(move |_, _| xi),
        }
    }

    #[test]
    fn zero_payoff_is_worthless() {
        assert_eq!(binomial_american(&spec(0.0, 0.0), 50).unwrap(), 0.0);
    }

    #[test]
    fn dominant_exercise_returns_payoff() {
        assert_eq!(binomial_american(&spec(3.0, 1.0), 50).unwrap(), 3.0);
    }

    #[test]
    fn put_refinement_contracts() {
        let s = MarkovianSpec::american_put(36.0, 40.0, 0.06, 0.2, 1.0);
        let v: Vec<f64> = [200, 400, 800, 1600].iter().map(|n| binomial_american(&s, *n).unwrap()).collect();
        let d1 = (v[1] - v[0]).abs();
        let d2 = (v[2] - v[1]).abs();
        let d3 = (v[3] - v[2]).abs();
        assert!(d2 < d1 && d3 < d2, "{v:?}");
        assert!((v[3] - 4.4868).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn multiple_controls_rejected() {
        let mut s = spec(0.0, 0.0);
        s.vols.push(1.0);
        assert!(binomial_american(&s, 10).is_err());
    }
}
