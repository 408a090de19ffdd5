use serde::Serialize;

use super::solution::{Layout, RbsdeSolution};
use crate::error::{domain, Result};
use crate::path_space::LevelCascade;

/// Increments below this size are treated as float noise.
const DK_TOL: f64 = 1e-12;
/// A reflection counts as on the barrier when `Y − h` is below this.
const CONTACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkorokhodReport {
    /// Largest `Σ_i |Y_i − h_i|·ΔK_i` along any path (tree: any branch).
    pub max_flat_off_defect: f64,
    pub min_dk: f64,
    /// `min (Y − h)` over every retained node.
    pub min_reflection_gap: f64,
    pub k_nondecreasing: bool,
    /// Total `K` mass (mean over paths, summed over steps on the tree).
    pub total_k_mass: f64,
    /// Fraction of positive increments with `Y − h > 1e−8`.
    pub off_barrier_fraction: f64,
    /// Share of `K` mass placed at steps `t_i` with no cascade knot in
    /// `(t_{i−1}, t_i]`; present when per-path cascades are supplied.
    pub off_knot_fraction: Option<f64>,
}

/// Checks the discrete Skorokhod conditions on a retained solution.
/// `cascades` holds one cascade per path of a path-layout solution.
pub fn skorokhod_report(sol: &RbsdeSolution, cascades: Option<&[LevelCascade]>) -> Result<SkorokhodReport> {
    if !sol.has_grids() {
        return Err(domain("the solution kept no grids; rerun with grids retained"));
    }
    let n = sol.n_steps;
    let mut min_dk = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    let mut positive = 0usize;
    let mut off_barrier = 0usize;
    for i in 0..=n {
        for (o, dk) in sol.dk[i].iter().enumerate() {
            min_dk = min_dk.min(*dk);
            let gap = sol.y[i][o] - sol.barrier[i][o];
            min_gap = min_gap.min(gap);
            if *dk > DK_TOL {
                positive += 1;
                if gap > CONTACT_TOL {
                    off_barrier += 1;
                }
            }
        }
    }
    let term = |i: usize, o: usize| (sol.y[i][o] - sol.barrier[i][o]).abs() * sol.dk[i][o];

    let (defect, mass, off_knot) = match sol.layout {
        Layout::Tree { .. } => {
            if cascades.is_some() {
                return Err(domain("cascades apply to path-layout solutions only"));
            }
            // Max-path-sum over the recombining tree; node o of step i has
            // children o, o+1, o+2.
            let mut best: Vec<f64> = (0..sol.dk[n].len()).map(|o| term(n, o)).collect();
            for i in (0..n).rev() {
                best = (0..sol.dk[i].len()).map(|o| term(i, o) + best[o].max(best[o + 1]).max(best[o + 2])).collect();
            }
            let mass: f64 = sol.dk.iter().flatten().sum();
            (best[0], mass, None)
        }
        Layout::Paths { n_paths } => {
            if let Some(c) = cascades {
                if c.len() != n_paths {
                    return Err(domain(format!("{} cascades for {n_paths} paths", c.len())));
                }
            }
            let mut defect = 0.0f64;
            let mut mass = 0.0;
            let mut off = 0.0;
            for p in 0..n_paths {
                defect = defect.max((0..=n).map(|i| term(i, p)).sum());
                for i in 0..=n {
                    let dk = sol.dk[i][p];
                    mass += dk;
                    if let Some(c) = cascades {
                        // The terminal correction sits at a knot by construction.
                        let t = sol.t0 + i as f64 * sol.dt;
                        if i < n && dk > 0.0 && !c[p].has_knot_in(t - sol.dt, t) {
                            off += dk;
                        }
                    }
                }
            }
            let frac = cascades.map(|_| if mass > 0.0 { off / mass } else { 0.0 });
            (defect, mass / n_paths as f64, frac)
        }
    };
    Ok(SkorokhodReport {
        max_flat_off_defect: defect,
        min_dk,
        min_reflection_gap: min_gap,
        k_nondecreasing: min_dk >= 0.0,
        total_k_mass: mass,
        off_barrier_fraction: if positive > 0 { off_barrier as f64 / positive as f64 } else { 0.0 },
        off_knot_fraction: off_knot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemSpec;
    use crate::path_space::PathState;
    use crate::rbsde::{solve_rbsde_tree, TreeOptions};

    fn report(name: &str) -> SkorokhodReport {
        let d = ProblemSpec::preset(name).unwrap().build().unwrap();
        let opts = TreeOptions { keep_grids: true, ..TreeOptions::steps(30) };
        let s = solve_rbsde_tree(&d, &PathState::origin(0.0, 1), &opts).unwrap();
        skorokhod_report(&s, None).unwrap()
    }

    #[test]
    fn inactive_barrier_has_no_reflection() {
        let r = report("martingale-quadratic");
        assert_eq!(r.total_k_mass, 0.0);
        assert_eq!(r.max_flat_off_defect, 0.0);
    }

    #[test]
    fn put_reflection_is_flat_off() {
        let r = report("american-put");
        assert!(r.total_k_mass > 0.0);
        assert!(r.max_flat_off_defect <= 1e-8);
        assert!(r.k_nondecreasing && r.min_reflection_gap >= -1e-8);
        assert_eq!(r.off_barrier_fraction, 0.0);
    }

    #[test]
    fn missing_grids_is_an_error() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        let s = solve_rbsde_tree(&d, &PathState::origin(0.0, 1), &TreeOptions::steps(4)).unwrap();
        assert!(skorokhod_report(&s, None).is_err());
    }
}
