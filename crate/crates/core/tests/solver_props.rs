use ppde_core::model::{PathFunctionalSpec as P, PRESETS};
use ppde_core::nonlinear::{lower_expectation, snell_one_step_checks, snell_upper, upper_expectation, Lattice};
use ppde_core::rbsde::{
    skorokhod_report, solve_penalized, solve_rbsde_lsmc, solve_rbsde_tree, LsmcOptions, Penalty, PenaltyScheme,
    TreeOptions,
};
use ppde_core::simulate::{euler_bundle_from_state, ControlPolicy};
use ppde_core::{PathState, ProblemSpec};
use proptest::prelude::*;

fn origin() -> PathState {
    PathState::origin(0.0, 1)
}

#[test]
fn bundles_are_martingales_with_the_right_covariance() {
    let d = ProblemSpec::preset("two-vol-convex").unwrap().build().unwrap();
    let n_paths = 20_000;
    for policy in [ControlPolicy::constant(0), ControlPolicy::constant(1), ControlPolicy::one_switch(0, 1, 5, 10)] {
        let b = euler_bundle_from_state(&d, &origin(), &policy, 10, n_paths, 9, false).unwrap();
        let xs: Vec<f64> = (0..n_paths).map(|p| b.x1(p, 10)).collect();
        let m = xs.iter().sum::<f64>() / n_paths as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n_paths - 1) as f64;
        assert!(m.abs() <= 3.0 * (var / n_paths as f64).sqrt(), "{policy:?}: mean {m}");
        // One-step increments against dt·σ².
        for i in [0, 9] {
            let s = d.controls.vol1(b.control(0, i));
            let inc: Vec<f64> = (0..n_paths).map(|p| b.x1(p, i + 1) - b.x1(p, i)).collect();
            let v = inc.iter().map(|x| x * x).sum::<f64>() / n_paths as f64;
            let target = b.dt * s * s;
            // Var of the squared Gaussian increment is 2·target².
            let se = (2.0 * target * target / n_paths as f64).sqrt();
            assert!((v - target).abs() <= 3.0 * se + 1e-15, "{policy:?} step {i}: {v} vs {target}");
        }
    }
}

#[test]
fn equal_seeds_give_equal_bundles() {
    let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
    let a = euler_bundle_from_state(&d, &origin(), &ControlPolicy::constant(0), 12, 300, 4, true).unwrap();
    let b = euler_bundle_from_state(&d, &origin(), &ControlPolicy::constant(0), 12, 300, 4, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reflection_holds_for_tree_and_regression() {
    for p in PRESETS {
        let d = ProblemSpec::preset(p).unwrap().build().unwrap();
        let s = solve_rbsde_tree(&d, &origin(), &TreeOptions { keep_grids: true, ..TreeOptions::steps(30) }).unwrap();
        assert!(skorokhod_report(&s, None).unwrap().min_reflection_gap >= -1e-8, "{p}");
        let b = euler_bundle_from_state(&d, &origin(), &ControlPolicy::constant(0), 20, 2_000, 5, true).unwrap();
        let s = solve_rbsde_lsmc(&d, &b, &LsmcOptions { keep_paths: true, ..LsmcOptions::default() }).unwrap();
        let r = skorokhod_report(&s, None).unwrap();
        assert!(r.min_reflection_gap >= -1e-8 && r.k_nondecreasing, "{p}: {r:?}");
    }
}

#[test]
fn penalized_values_increase_to_the_reflected_value() {
    for p in ["abs-stopping", "american-put"] {
        let d = ProblemSpec::preset(p).unwrap().build().unwrap();
        let opts = TreeOptions::steps(20);
        let refl = solve_rbsde_tree(&d, &origin(), &opts).unwrap().y0;
        let (mut prev, mut gap) = (f64::NEG_INFINITY, f64::INFINITY);
        for e in 0..=8 {
            let m = (1u32 << e) as f64;
            let y = solve_penalized(&d, &origin(), &opts, Penalty { m, scheme: PenaltyScheme::Implicit }).unwrap().y0;
            assert!(y >= prev - 1e-12, "{p} m={m}");
            assert!((refl - y).abs() <= gap + 1e-12, "{p} m={m}");
            prev = y;
            gap = (refl - y).abs();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn comparison_under_ordered_data(
        bump_xi in 0.0f64..0.5,
        bump_h in 0.0f64..0.5,
        coef in 0.2f64..1.5,
        level in -1.0f64..0.5,
    ) {
        let mut lo = ProblemSpec::preset("abs-stopping").unwrap();
        lo.barrier = P::Constant { value: level };
        lo.terminal = P::Abs { coef };
        let mut hi = lo.clone();
        hi.barrier = P::Constant { value: level + bump_h };
        hi.terminal = P::Abs { coef: coef + bump_xi };
        let (lo, hi) = (lo.build().unwrap(), hi.build().unwrap());
        let opts = TreeOptions::steps(16);
        let a = solve_rbsde_tree(&lo, &origin(), &opts).unwrap().y0;
        let b = solve_rbsde_tree(&hi, &origin(), &opts).unwrap().y0;
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn lower_expectation_is_dual_to_upper(c in prop::collection::vec(-1.0f64..1.0, 4), l in 0.2f64..1.0) {
        let lat = Lattice::standard(0.0, 1.0, 12, l, 0.5, None).unwrap();
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * (x - 0.2).abs();
        let lo = lower_expectation(&lat, &f);
        let up = upper_expectation(&lat, &|x| -f(x));
        prop_assert!((lo + up).abs() < 1e-12);
        prop_assert!(lo <= upper_expectation(&lat, &f) + 1e-12);
    }

    #[test]
    fn expectations_are_monotone_in_l(c in prop::collection::vec(-1.0f64..1.0, 3), l1 in 0.2f64..1.0, l2 in 0.2f64..1.0) {
        let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        // A common spacing keeps the two lattices on the same nodes.
        let dx = Lattice::standard(0.0, 1.0, 12, b, 0.3, None).unwrap().dx;
        let small = Lattice::standard(0.0, 1.0, 12, a, 0.3, Some(dx)).unwrap();
        let big = Lattice::standard(0.0, 1.0, 12, b, 0.3, Some(dx)).unwrap();
        let f = |x: f64| c[0] * x + c[1] * x * x + c[2] * (x + 0.1).abs();
        prop_assert!(upper_expectation(&small, &f) <= upper_expectation(&big, &f) + 1e-12);
        prop_assert!(lower_expectation(&big, &f) <= lower_expectation(&small, &f) + 1e-12);
    }

    #[test]
    fn snell_envelope_dominates_and_is_a_supermartingale(c in prop::collection::vec(-1.0f64..1.0, 3), n in 1usize..15) {
        let lat = Lattice::standard(0.0, 1.0, n, 0.5, 0.5, None).unwrap();
        let r = snell_upper(&lat, &|i, x| c[0] * x + c[1] * (x - 0.1).abs() + c[2] * lat.time(i), None);
        for i in 0..=n {
            for o in 0..r.envelope[i].len() {
                prop_assert!(r.envelope[i][o] >= r.reward[i][o]);
            }
        }
        let (sup, mart) = snell_one_step_checks(&lat, &r);
        prop_assert!(sup <= 1e-12 && mart <= 1e-12);
    }
}
