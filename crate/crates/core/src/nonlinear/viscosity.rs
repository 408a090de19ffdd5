use serde::Serialize;

use super::lattice::Lattice;
use super::snell::{snell_general, StopRule};
use crate::error::{domain, Result};
use crate::model::{operator_l, ProblemData, TestFunctional};
use crate::path_space::PathState;

/// Lattice-level membership margins of a test functional touching `u` at
/// `(t, x0)`. A margin `≥ −tol` means membership.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    /// `inf_τ E̲[(φ − u)_{τ∧ch_δ}]`: tests from above (subsolution side).
    pub sub_margin: f64,
    /// `−sup_τ Ē[(φ − u)_{τ∧ch_δ}]`: tests from below (supersolution side).
    pub super_margin: f64,
}

/// Evaluates the stopped differences `φ − u` over all lattice stopping rules
/// up to the exit of the ball of radius `delta` (capped at `t + δ`). The
/// lattice must start at `t`; `u` and `φ` take `(time, x0 + displacement)`.
pub fn test_membership(
    lat: &Lattice,
    u: &dyn Fn(f64, f64) -> f64,
    phi: &TestFunctional,
    x0: f64,
    delta: f64,
    tol: f64,
) -> Result<MembershipReport> {
    let t = lat.t0;
    let gap0 = phi.eval(t, x0) - u(t, x0);
    if gap0.abs() > tol {
        return Err(domain(format!("φ − u = {gap0} at the touching point; shift φ first")));
    }
    let cap = (t + delta).min(lat.horizon);
    let diff = |i: usize, x: f64| {
        let s = lat.time(i);
        phi.eval(s, x0 + x) - u(s, x0 + x)
    };
    let forced = |i: usize, x: f64| x.abs() >= delta - 1e-12 || lat.time(i) >= cap - 1e-12;
    let neg = |i: usize, x: f64| -diff(i, x);
    let low = snell_general(lat, &neg, StopRule::OptionalAndForced(&forced), true);
    let high = snell_general(lat, &diff, StopRule::OptionalAndForced(&forced), true);
    Ok(MembershipReport { sub_margin: -low.value, super_margin: -high.value })
}

/// Membership margins together with `Lφ` at the touching point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscositySpotCheck {
    pub membership: MembershipReport,
    pub operator_value: f64,
}

pub fn viscosity_spot_check(
    data: &ProblemData,
    lat: &Lattice,
    u: &dyn Fn(f64, f64) -> f64,
    phi: &TestFunctional,
    x0: f64,
    delta: f64,
    tol: f64,
) -> Result<ViscositySpotCheck> {
    let membership = test_membership(lat, u, phi, x0, delta, tol)?;
    let st = PathState::scalar(lat.t0, x0, x0, x0);
    let operator_value = operator_l(data, phi, &st);
    Ok(ViscositySpotCheck { membership, operator_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> Lattice {
        Lattice::standard(0.2, 1.0, 8, 1.0, 0.5, None).unwrap()
    }

    #[test]
    fn identical_functions_have_zero_margin() {
        let phi = TestFunctional::quadratic_at(0.2, 0.0, 1.0, 0.5, 2.0, -1.0);
        let p2 = phi.clone();
        let r = test_membership(&lat(), &move |t, x| p2.eval(t, x), &phi, 0.0, 0.3, 1e-12).unwrap();
        assert!(r.sub_margin.abs() < 1e-12 && r.super_margin.abs() < 1e-12);
    }

    #[test]
    fn dominating_functional_is_a_sub_test() {
        let phi = TestFunctional::quadratic_at(0.2, 0.0, 1.0, 0.5, 2.0, 0.0);
        let p2 = phi.clone();
        let eps = 0.3;
        let u = move |t: f64, x: f64| p2.eval(t, x) - eps * (t - 0.2);
        let r = test_membership(&lat(), &u, &phi, 0.0, 0.3, 1e-12).unwrap();
        assert!(r.sub_margin >= -1e-12, "{r:?}");
    }

    #[test]
    fn misaligned_is_rejected() {
        let phi = TestFunctional::quadratic_at(0.2, 0.0, 1.0, 0.0, 0.0, 0.0);
        assert!(test_membership(&lat(), &|_, _| 0.0, &phi, 0.0, 0.3, 1e-9).is_err());
    }
}
