use super::lattice::Lattice;
use super::snell::{snell_general, StopRule};

/// `Ē^L[ξ(X_T)]` on the lattice.
pub fn upper_expectation(lat: &Lattice, xi: &dyn Fn(f64) -> f64) -> f64 {
    expectation(lat, xi, true)
}

/// `E̲^L[ξ] = −Ē^L[−ξ]`.
pub fn lower_expectation(lat: &Lattice, xi: &dyn Fn(f64) -> f64) -> f64 {
    -upper_expectation(lat, &|x| -xi(x))
}

fn expectation(lat: &Lattice, xi: &dyn Fn(f64) -> f64, upper: bool) -> f64 {
    let n = lat.n_steps;
    let mut next: Vec<f64> = (0..Lattice::width(n)).map(|o| xi(lat.x(o as i64 - n as i64))).collect();
    let mut cur = vec![0.0; next.len()];
    let mut arg = vec![0usize; next.len()];
    for i in (0..n).rev() {
        let w = Lattice::width(i);
        lat.backward(i, &next, &mut cur[..w], &mut arg[..w], upper);
        std::mem::swap(&mut next, &mut cur);
        next.truncate(w);
        cur.truncate(w);
    }
    next[0]
}

/// `E̲^L[ch_δ]` for the hitting time of the ball of radius `delta`, capped at
/// `(t0 + δ) ∧ T`.
pub fn positive_hitting_check(lat: &Lattice, delta: f64) -> f64 {
    let cap = (lat.t0 + delta).min(lat.horizon);
    let reward = |i: usize, _x: f64| -lat.time(i).min(cap);
    let stop = |i: usize, x: f64| x.abs() >= delta - 1e-12 || lat.time(i) >= cap - 1e-12;
    // Forced stopping and no voluntary stop: the upper Snell envelope of
    // −ch with stopping only on the forced set is −E̲[ch].
    let res = snell_general(lat, &reward, StopRule::ForcedOnly(&stop), true);
    -res.value
}
