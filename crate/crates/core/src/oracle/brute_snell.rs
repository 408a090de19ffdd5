use crate::error::{Error, Result};
use crate::nonlinear::Lattice;

/// Default cap on visited history nodes.
pub const DEFAULT_BUDGET: usize = 20_000_000;

/// Stencil recomputed from the lattice parameters: `[down, stay, up]`.
fn stencil(lat: &Lattice) -> Vec<[f64; 3]> {
    lat.actions
        .iter()
        .map(|a| {
            let d = 0.5 * a.vol * a.vol * lat.dt / (lat.dx * lat.dx);
            let up = d + if a.drift > 0.0 { a.drift * lat.dt / lat.dx } else { 0.0 };
            let dn = d + if a.drift < 0.0 { -a.drift * lat.dt / lat.dx } else { 0.0 };
            [dn, 1.0 - up - dn, up]
        })
        .collect()
}

struct Search<'a> {
    n: usize,
    st: Vec<[f64; 3]>,
    reward: &'a dyn Fn(&[i64]) -> f64,
    visits: usize,
    budget: usize,
    optional_stop: bool,
    upper: bool,
}

impl Search<'_> {
    fn value(&mut self, hist: &mut Vec<i64>) -> Result<f64> {
        self.visits += 1;
        if self.visits > self.budget {
            return Err(Error::Budget(format!("more than {} history nodes", self.budget)));
        }
        let here = (self.reward)(hist);
        if hist.len() == self.n + 1 {
            return Ok(here);
        }
        let last = *hist.last().unwrap();
        let mut best = if self.upper { f64::NEG_INFINITY } else { f64::INFINITY };
        for a in 0..self.st.len() {
            let p = self.st[a];
            let mut v = 0.0;
            for (m, prob) in [-1i64, 0, 1].iter().zip(p) {
                if prob == 0.0 {
                    continue;
                }
                hist.push(last + m);
                v += prob * self.value(hist)?;
                hist.pop();
            }
            best = if self.upper { best.max(v) } else { best.min(v) };
        }
        if self.optional_stop {
            best = if self.upper { best.max(here) } else { best.min(here) };
        }
        Ok(best)
    }
}

/// `sup` over all stopping rules and adapted action choices of
/// `E[X_τ]`, by recursion over the non-recombining history tree. The reward
/// sees the whole history of node indices `j_0 = 0, j_1, ...`.
pub fn brute_force_snell(lat: &Lattice, reward: &dyn Fn(&[i64]) -> f64, budget: usize) -> Result<f64> {
    let mut s =
        Search { n: lat.n_steps, st: stencil(lat), reward, visits: 0, budget, optional_stop: true, upper: true };
    s.value(&mut vec![0])
}

/// `sup` (or `inf`) over adapted action choices of `E[ξ(history)]` with no
/// stopping.
pub fn brute_force_expectation(
    lat: &Lattice,
    payoff: &dyn Fn(&[i64]) -> f64,
    upper: bool,
    budget: usize,
) -> Result<f64> {
    let wrapped = |h: &[i64]| if h.len() == lat.n_steps + 1 { payoff(h) } else { f64::NAN };
    let mut s =
        Search { n: lat.n_steps, st: stencil(lat), reward: &wrapped, visits: 0, budget, optional_stop: false, upper };
    s.value(&mut vec![0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::Action;
    use approx::assert_abs_diff_eq;

    fn two_action_lattice(n: usize) -> Lattice {
        let acts = vec![Action { drift: 0.5, vol: 0.5 }, Action { drift: -0.25, vol: 1.0 }];
        Lattice::new(0.0, 1.0, n, 0.5, acts, None).unwrap()
    }

    #[test]
    fn deterministic_increasing_reward() {
        let lat = two_action_lattice(3);
        let v = brute_force_snell(&lat, &|h| (h.len() - 1) as f64 * lat.dt, DEFAULT_BUDGET).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_step_closed_form() {
        let lat = two_action_lattice(1);
        let x = |h: &[i64]| (lat.x(*h.last().unwrap()) - 0.1).abs();
        let v = brute_force_snell(&lat, &x, DEFAULT_BUDGET).unwrap();
        let st = stencil(&lat);
        let mut best = x(&[0]);
        for p in &st {
            best = best.max(p[0] * x(&[0, -1]) + p[1] * x(&[0, 0]) + p[2] * x(&[0, 1]));
        }
        assert_abs_diff_eq!(v, best, epsilon = 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let lat = two_action_lattice(5);
        assert!(matches!(brute_force_snell(&lat, &|_| 0.0, 100), Err(Error::Budget(_))));
    }

    /// Literal enumeration of every strategy: each of the 13 decision nodes of
    /// a 3-step history tree picks stop, action 0 or action 1.
    #[test]
    fn matches_literal_strategy_enumeration() {
        let lat = two_action_lattice(3);
        let st = stencil(&lat);
        let reward = |h: &[i64]| lat.x(*h.last().unwrap()).abs() + 0.05 * h.len() as f64;
        fn eval(
            h: &mut Vec<i64>,
            strat: &[u8],
            st: &[[f64; 3]],
            reward: &dyn Fn(&[i64]) -> f64,
            index: &dyn Fn(&[i64]) -> usize,
        ) -> f64 {
            if h.len() == 4 {
                return reward(h);
            }
            let choice = strat[index(h)];
            if choice == 0 {
                return reward(h);
            }
            let p = st[(choice - 1) as usize];
            let last = *h.last().unwrap();
            let mut v = 0.0;
            for (m, prob) in [-1i64, 0, 1].iter().zip(p) {
                h.push(last + m);
                v += prob * eval(h, strat, st, reward, index);
                h.pop();
            }
            v
        }
        // Decision nodes: depth 0 (1 node), 1 (3 nodes), 2 (9 nodes).
        let index = |h: &[i64]| -> usize {
            let mut code = 0usize;
            for d in 1..h.len() {
                code = code * 3 + (h[d] - h[d - 1] + 1) as usize;
            }
            match h.len() {
                1 => 0,
                2 => 1 + code,
                _ => 4 + code,
            }
        };
        let mut best = f64::NEG_INFINITY;
        let mut strat = [0u8; 13];
        let total = 3usize.pow(13);
        for s in 0..total {
            let mut c = s;
            for v in strat.iter_mut() {
                *v = (c % 3) as u8;
                c /= 3;
            }
            best = best.max(eval(&mut vec![0], &strat, &st, &reward, &index));
        }
        let v = brute_force_snell(&lat, &reward, DEFAULT_BUDGET).unwrap();
        assert_abs_diff_eq!(v, best, epsilon = 1e-13);
    }
}
