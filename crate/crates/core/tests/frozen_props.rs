use ppde_core::frozen::{frozen_deviation, CellKind, CellMesh, FrozenCell, FrozenScheme, SchemeOptions};
use ppde_core::path_space::Skeleton;
use ppde_core::simulate::{euler_bundle_from_state, ControlPolicy};
use ppde_core::{PathState, ProblemSpec};

fn quick() -> SchemeOptions {
    SchemeOptions { mesh: CellMesh { j_half: 20, ..CellMesh::default() }, mc_paths: 400, ..SchemeOptions::default() }
}

#[test]
fn penalized_lies_below_obstacle_nodewise() {
    let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
    let root = Skeleton::root(0.0, 1);
    let g = FrozenScheme::new(&d, 0.4, CellKind::Obstacle, &quick()).unwrap().solve(&root, 0, true).unwrap();
    let gr = g.rows.as_ref().unwrap();
    for m in [1.0, 16.0, 256.0] {
        let t = FrozenScheme::new(&d, 0.4, CellKind::Penalized { m }, &quick()).unwrap().solve(&root, 0, true).unwrap();
        let tr = t.rows.as_ref().unwrap();
        // Finite-difference accuracy of the mesh; boundary values come from
        // separate penalized and reflected fallbacks at the depth cap.
        let tol = 1e-3;
        for (a, b) in tr.iter().zip(gr) {
            for (x, y) in a.iter().zip(b) {
                assert!(x <= &(y + tol), "m={m}: {x} > {y}");
            }
        }
    }
}

#[test]
fn obstacle_values_are_stable_in_the_prefix() {
    // Γ_1 at prefixes whose last knots differ by ε. The depth-cap fallback is
    // a regression estimate, so the trend is checked up to its noise.
    let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
    let opts = SchemeOptions { mc_paths: 2_000, ..quick() };
    let s = FrozenScheme::new(&d, 0.4, CellKind::Obstacle, &opts).unwrap();
    let root = Skeleton::root(0.0, 1);
    let at = |x: f64| s.value(&root.extended(0.4, &[x]), 1).unwrap();
    let base = at(0.1);
    let eps = [0.3, 0.2, 0.1, 0.05];
    let diffs: Vec<f64> = eps.iter().map(|&e| (at(0.1 + e) - base).abs()).collect();
    let noise = 1e-2;
    for w in diffs.windows(2) {
        assert!(w[1] <= w[0] + noise, "{diffs:?}");
    }
    assert!(diffs[3] <= 0.25 * diffs[0], "{diffs:?}");
    // A modulus fitted on the coarsest offset dominates the rest.
    let fit = diffs[0] / d.rho0.eval(eps[0]);
    for (&e, &g) in eps.iter().zip(&diffs) {
        assert!(g <= fit * d.rho0.eval(e) + noise, "{diffs:?}");
    }
}

#[test]
fn frozen_data_stay_within_the_modulus() {
    for p in ["abs-stopping", "running-max", "american-put"] {
        let d = ProblemSpec::preset(p).unwrap().build().unwrap();
        for alpha in [0.4, 0.2, 0.1] {
            let cell = FrozenCell::new(Skeleton::root(0.0, 1), alpha).unwrap();
            let b =
                euler_bundle_from_state(&d, &PathState::origin(0.0, 1), &ControlPolicy::constant(0), 100, 500, 3, true)
                    .unwrap();
            let r = frozen_deviation(&d, &cell, &b).unwrap();
            assert!(r.within(1e-9), "{p} α={alpha}: {r:?}");
        }
    }
}
