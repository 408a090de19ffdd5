use nalgebra::DMatrix;

use super::data::ProblemData;
use super::test_functional::TestFunctional;
use crate::path_space::PathState;

/// `G = max_k ½ σ(k)σ(k)ᵀ : γ + F(·, y, σ(k)ᵀz, k)`, with the maximizing
/// control (ties go to the lowest index).
pub fn generator_g(data: &ProblemData, st: &PathState, y: f64, z: &[f64], gamma: &DMatrix<f64>) -> (f64, usize) {
    let mut sz = vec![0.0; z.len()];
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..data.controls.len() {
        let trace = data.controls.sigma_sq(k).component_mul(gamma).sum();
        data.controls.apply_t(k, z, &mut sz);
        let v = 0.5 * trace + data.f(st, y, &sz, k);
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

/// Scalar form of [`generator_g`] for dimension one.
#[inline]
pub fn generator_g1(data: &ProblemData, st: &PathState, y: f64, z: f64, gamma: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..data.controls.len() {
        let s = data.controls.vol1(k);
        let v = 0.5 * s * s * gamma + data.f1(st, y, z, k);
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

/// `Lφ = −∂_tφ − G(φ, ∂_ωφ, ∂_ωωφ)` at the current point of `st`.
pub fn operator_l(data: &ProblemData, phi: &TestFunctional, st: &PathState) -> f64 {
    let (t, x) = (st.t, st.x1());
    let (g, _) = generator_g1(data, st, phi.eval(t, x), phi.dx(t, x), phi.dxx(t, x));
    -phi.dt(t, x) - g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Controls, ProblemSpec};
    use approx::assert_abs_diff_eq;

    fn data_with(vols: &[f64]) -> ProblemData {
        let d = ProblemSpec::preset("martingale-quadratic").unwrap().build().unwrap();
        d.with_controls(Controls::scalar(vols).unwrap())
    }

    #[test]
    fn generator_examples() {
        let st = PathState::origin(0.0, 1);
        let one = data_with(&[1.0]);
        assert_eq!(generator_g1(&one, &st, 0.0, 0.0, 2.0), (1.0, 0));
        let two = data_with(&[0.5, 1.0]);
        assert_eq!(generator_g1(&two, &st, 0.0, 0.0, 2.0), (1.0, 1));
        assert_eq!(generator_g1(&two, &st, 0.0, 0.0, -2.0), (-0.25, 0));
        let g = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(generator_g(&two, &st, 0.0, &[0.0], &g), (1.0, 1));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let st = PathState::origin(0.0, 1);
        let two = data_with(&[1.0, -1.0]);
        assert_eq!(generator_g1(&two, &st, 0.0, 0.0, 2.0).1, 0);
    }

    #[test]
    fn operator_examples() {
        let d = data_with(&[1.0]);
        let st = PathState::scalar(0.3, 0.7, 0.7, 0.0);
        let t = TestFunctional::new(vec![(1.0, 1, 0)]).unwrap();
        assert_abs_diff_eq!(operator_l(&d, &t, &st), -1.0, epsilon = 1e-14);
        let x2 = TestFunctional::new(vec![(1.0, 0, 2)]).unwrap();
        assert_abs_diff_eq!(operator_l(&d, &x2, &st), -1.0, epsilon = 1e-14);
        let heat = TestFunctional::new(vec![(1.0, 0, 2), (-1.0, 1, 0)]).unwrap();
        for i in 0..20 {
            let st = PathState::scalar(0.05 * i as f64, -1.0 + 0.1 * i as f64, 1.0, -1.0);
            assert_abs_diff_eq!(operator_l(&d, &heat, &st), 0.0, epsilon = 1e-14);
        }
    }
}
