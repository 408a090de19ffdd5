use nalgebra::DMatrix;
use ppde_core::model::{
    change_of_variable, generator_g, monotonicity_probes, operator_l, DriverSpec, PathFunctionalSpec as P, SigmaSpec,
    TestFunctional, Transform, PRESETS,
};
use ppde_core::{PathState, ProblemData, ProblemSpec};
use proptest::prelude::*;

fn two_dim() -> ProblemData {
    ProblemSpec {
        name: "two-dim".into(),
        horizon: 1.0,
        sigmas: vec![
            SigmaSpec::Matrix(vec![vec![1.0, 0.0], vec![0.3, 0.8]]),
            SigmaSpec::Matrix(vec![vec![0.6, 0.2], vec![0.0, 0.9]]),
        ],
        driver: DriverSpec::Linear { y_coef: -0.2, z_coef: 0.3, constant: 0.1 },
        barrier: P::Constant { value: -10.0 },
        terminal: P::Quadratic { coef: 1.0, time_coef: 0.0 },
        m0: 10.0,
        l0: 1.0,
        rho0: Default::default(),
        c0: 0.5,
    }
    .build()
    .unwrap()
}

fn sym(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[v[0], v[1], v[1], v[2]])
}

fn state(t: f64, x: &[f64]) -> PathState {
    let mut st = PathState::origin(t, 2);
    st.x.copy_from_slice(x);
    st
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generator_is_monotone_in_gamma(
        g in prop::collection::vec(-2.0f64..2.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 2),
        z in prop::collection::vec(-1.0f64..1.0, 2),
        y in -1.0f64..1.0,
    ) {
        let d = two_dim();
        let st = state(0.3, &[0.1, -0.2]);
        let gamma = sym(&g);
        // A PSD perturbation b·bᵀ.
        let bump = DMatrix::from_row_slice(2, 1, &b) * DMatrix::from_row_slice(1, 2, &b);
        let lo = generator_g(&d, &st, y, &z, &gamma).0;
        let hi = generator_g(&d, &st, y, &z, &(gamma + bump)).0;
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn generator_is_convex_in_z_and_gamma(
        g1 in prop::collection::vec(-2.0f64..2.0, 3),
        g2 in prop::collection::vec(-2.0f64..2.0, 3),
        z1 in prop::collection::vec(-1.0f64..1.0, 2),
        z2 in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let d = two_dim();
        let st = state(0.5, &[0.0, 0.4]);
        let zm: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 0.5 * (a + b)).collect();
        let gm = (sym(&g1) + sym(&g2)) * 0.5;
        let mid = generator_g(&d, &st, 0.2, &zm, &gm).0;
        let ends = 0.5 * (generator_g(&d, &st, 0.2, &z1, &sym(&g1)).0 + generator_g(&d, &st, 0.2, &z2, &sym(&g2)).0);
        prop_assert!(mid <= ends + 1e-12);
    }

    #[test]
    fn operator_vanishes_on_the_heat_solution(t in 0.0f64..1.0, x in -3.0f64..3.0) {
        let d = ProblemSpec::preset("martingale-quadratic").unwrap().build().unwrap();
        let phi = TestFunctional::new(vec![(1.0, 0, 2), (-1.0, 1, 0)]).unwrap();
        prop_assert!(operator_l(&d, &phi, &PathState::scalar(t, x, x, x)).abs() < 1e-12);
    }

    #[test]
    fn identity_transform_changes_nothing(t in 0.0f64..1.0, x in -2.0f64..2.0, y in -5.0f64..5.0, z in -3.0f64..3.0, p in 0..PRESETS.len()) {
        let d = ProblemSpec::preset(PRESETS[p]).unwrap().build().unwrap();
        let i = change_of_variable(&d, Transform::IDENTITY);
        let st = PathState::scalar(t, x, x.max(0.0), x.min(0.0));
        for k in 0..d.controls.len() {
            prop_assert!((i.f(&st, y, &[z], k) - d.f(&st, y, &[z], k)).abs() < 1e-12);
        }
        prop_assert!((i.h(&st) - d.h(&st)).abs() < 1e-12);
        prop_assert!((i.xi(&st) - d.xi(&st)).abs() < 1e-12);
    }
}

#[test]
fn transformed_data_are_strictly_monotone_on_every_preset() {
    for p in PRESETS {
        let d = ProblemSpec::preset(p).unwrap().build().unwrap();
        let tr = Transform::standard(&d);
        let r = monotonicity_probes(&d, &change_of_variable(&d, tr), tr, 1000, 3);
        assert!(r.passed(), "{p}: {r:?}");
    }
}
