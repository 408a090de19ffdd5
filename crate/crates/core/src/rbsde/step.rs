use super::solution::{DriverMode, Penalty, PenaltyScheme};
use crate::error::{numeric, parameter, Result};

const FP_TOL: f64 = 1e-13;
const FP_MAX: usize = 500;

/// Checks the step-size requirements of the chosen scheme.
pub(crate) fn check_step(dt: f64, l0: f64, mode: DriverMode, penalty: Option<Penalty>) -> Result<()> {
    if mode == DriverMode::Implicit && l0 * dt >= 1.0 {
        return Err(parameter(format!("implicit driver needs L0·dt < 1 (L0 = {l0}, dt = {dt}); refine the grid")));
    }
    if let Some(p) = penalty {
        if p.m < 0.0 {
            return Err(parameter("penalty must be nonnegative"));
        }
        if p.scheme == PenaltyScheme::Explicit && dt * (l0 + p.m) > 1.0 {
            return Err(parameter(format!(
                "explicit penalty needs dt·(L0 + m) ≤ 1, got {}; refine the grid",
                dt * (l0 + p.m)
            )));
        }
    }
    Ok(())
}

fn fixed_point(mut y: f64, map: impl Fn(f64) -> f64) -> Result<f64> {
    for _ in 0..FP_MAX {
        let next = map(y);
        if !next.is_finite() {
            return Err(numeric("non-finite value in the one-step solve"));
        }
        if (next - y).abs() <= FP_TOL * (1.0 + next.abs()) {
            return Ok(next);
        }
        y = next;
    }
    Err(numeric("one-step fixed point did not converge"))
}

/// Solves the one-step equation `y = e + f(y)·dt [+ m·(h − y)⁺·dt]`.
pub(crate) fn solve_step(
    e: f64,
    f: impl Fn(f64) -> f64,
    dt: f64,
    mode: DriverMode,
    penalty: Option<(Penalty, f64)>,
) -> Result<f64> {
    match penalty {
        None => match mode {
            DriverMode::Explicit => Ok(e + f(e) * dt),
            DriverMode::Implicit => fixed_point(e, |y| e + f(y) * dt),
        },
        Some((p, h)) => match p.scheme {
            PenaltyScheme::Explicit => {
                let push = p.m * (h - e).max(0.0) * dt;
                match mode {
                    DriverMode::Explicit => Ok(e + f(e) * dt + push),
                    DriverMode::Implicit => fixed_point(e, |y| e + f(y) * dt + push),
                }
            }
            PenaltyScheme::Implicit => {
                let free = match mode {
                    DriverMode::Explicit => e + f(e) * dt,
                    DriverMode::Implicit => fixed_point(e, |y| e + f(y) * dt)?,
                };
                if free >= h {
                    return Ok(free);
                }
                let md = p.m * dt;
                match mode {
                    DriverMode::Explicit => Ok((free + md * h) / (1.0 + md)),
                    DriverMode::Implicit => fixed_point(free, |y| (e + f(y) * dt + md * h) / (1.0 + md)),
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn implicit_linear_driver() {
        let y = solve_step(1.0, |y| -0.5 * y, 0.1, DriverMode::Implicit, None).unwrap();
        assert_abs_diff_eq!(y, 1.0 / 1.05, epsilon = 1e-12);
    }

    #[test]
    fn penalty_is_monotone_in_m() {
        let mut prev = f64::NEG_INFINITY;
        for m in [0.0, 1.0, 2.0, 4.0, 64.0, 256.0] {
            let p = Penalty { m, scheme: PenaltyScheme::Implicit };
            let y = solve_step(0.2, |_| 0.0, 0.25, DriverMode::Implicit, Some((p, 1.0))).unwrap();
            assert!(y >= prev && y <= 1.0);
            prev = y;
        }
        assert!(1.0 - prev < 0.02);
    }

    #[test]
    fn explicit_penalty_guard() {
        let p = Penalty { m: 256.0, scheme: PenaltyScheme::Explicit };
        assert!(check_step(0.25, 0.0, DriverMode::Implicit, Some(p)).is_err());
        assert!(check_step(0.001, 0.0, DriverMode::Implicit, Some(p)).is_ok());
        assert!(check_step(0.5, 3.0, DriverMode::Implicit, None).is_err());
    }
}
