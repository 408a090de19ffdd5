use super::{euclid, DiscretePath, TIME_EPS};
use crate::error::{domain, Result};

const LEVEL_EPS: f64 = 1e-12;

/// `ch^t_δ`: first grid time at which the path started at `t` leaves the
/// open ball of radius `delta`, capped at `(t + delta) ∧ horizon`.
///
/// The sup of `|ω|` over a linear segment sits at an endpoint, so scanning
/// grid values gives the first grid time at which the running sup of the
/// interpolant reaches the level.
pub fn hitting_time_delta(t: f64, delta: f64, path: &DiscretePath, horizon: f64) -> f64 {
    let cap = (t + delta).min(horizon);
    let start = path.index_of(t).unwrap_or(0);
    for i in start + 1..path.len() {
        let s = path.time(i);
        if s > cap + TIME_EPS {
            break;
        }
        if euclid(path.point(i)) >= delta - LEVEL_EPS {
            return s.min(cap);
        }
    }
    cap
}

/// Successive hitting times of a level `alpha` together with the increments
/// of the path between consecutive hits.
///
/// `increments[0]` is the displacement from the anchor knot to `times[0]`
/// (it includes the starting offset `x`); later entries are the moves of
/// the path between consecutive hits.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCascade {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub increments: Vec<Vec<f64>>,
}

impl LevelCascade {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// True when `s` coincides with one of the hitting times.
    pub fn is_knot(&self, s: f64) -> bool {
        self.times.iter().any(|k| (k - s).abs() <= TIME_EPS)
    }

    /// True when some knot lies in `(a, b]`.
    pub fn has_knot_in(&self, a: f64, b: f64) -> bool {
        self.times.iter().any(|&k| k > a + TIME_EPS && k <= b + TIME_EPS)
    }
}

/// Builds the cascade `ch_0 < ch_1 < ...` for a start at `(t, x)` inside the
/// cell anchored at `anchor_time`.
///
/// `ch_0` is the first time `|x + B_s| ≥ alpha`, capped at
/// `(anchor_time + alpha) ∧ horizon`; `ch_{i+1}` is the first time
/// `|B_s − B_{ch_i}| ≥ alpha`, capped at `(ch_i + alpha) ∧ horizon`. The
/// cascade stops at the first entry equal to `horizon`.
pub fn level_cascade(
    t: f64,
    x: &[f64],
    alpha: f64,
    path: &DiscretePath,
    anchor_time: f64,
    horizon: f64,
) -> Result<LevelCascade> {
    if !(alpha > 0.0) {
        return Err(domain(format!("cascade level must be positive, got {alpha}")));
    }
    if x.len() != path.dim() {
        return Err(domain("start offset and path differ in dimension"));
    }
    if euclid(x) > alpha + LEVEL_EPS {
        return Err(domain(format!("start offset {} lies outside the ball of radius {alpha}", euclid(x))));
    }
    if anchor_time > t + TIME_EPS {
        return Err(domain(format!("anchor time {anchor_time} is after the start {t}")));
    }
    let dim = path.dim();
    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut cur = vec![0.0; dim];
    let mut diff = vec![0.0; dim];

    // ch_0, scanned from the start index itself.
    let cap0 = (anchor_time + alpha).min(horizon).max(t);
    let start = path.index_of(t)?;
    let mut ch = cap0;
    for i in start..path.len() {
        let s = path.time(i);
        if s > cap0 + TIME_EPS {
            break;
        }
        let p = path.point(i);
        for c in 0..dim {
            diff[c] = x[c] + p[c];
        }
        if euclid(&diff) >= alpha - LEVEL_EPS {
            ch = s.min(cap0);
            break;
        }
    }
    path.value_at(ch, &mut cur);
    times.push(ch);
    increments.push((0..dim).map(|c| x[c] + cur[c]).collect::<Vec<_>>());

    let mut prev = cur.clone();
    while ch < horizon - TIME_EPS {
        let cap = (ch + alpha).min(horizon);
        let mut next = cap;
        let first = ((ch - path.t0()) / path.dt()).floor().max(0.0) as usize;
        for i in first..path.len() {
            let s = path.time(i);
            if s <= ch + TIME_EPS {
                continue;
            }
            if s > cap + TIME_EPS {
                break;
            }
            let p = path.point(i);
            for c in 0..dim {
                diff[c] = p[c] - prev[c];
            }
            if euclid(&diff) >= alpha - LEVEL_EPS {
                next = s.min(cap);
                break;
            }
        }
        path.value_at(next, &mut cur);
        increments.push((0..dim).map(|c| cur[c] - prev[c]).collect());
        times.push(next);
        prev.copy_from_slice(&cur);
        ch = next;
    }
    Ok(LevelCascade { alpha, times, increments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cap_binds_on_zero_path() {
        let z = DiscretePath::zeros(0.0, 0.01, 100, 1);
        assert_abs_diff_eq!(hitting_time_delta(0.0, 0.3, &z, 1.0), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(hitting_time_delta(0.0, 1.5, &z, 1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slope_two_crosses_at_fifteen_hundredths() {
        let p = DiscretePath::linear(0.0, 0.01, 100, &[2.0]);
        assert_abs_diff_eq!(hitting_time_delta(0.0, 0.3, &p, 1.0), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn zero_cascade_uses_caps() {
        let z = DiscretePath::zeros(0.0, 0.01, 100, 1);
        let c = level_cascade(0.0, &[0.0], 0.3, &z, 0.0, 1.0).unwrap();
        let expect = [0.3, 0.6, 0.9, 1.0];
        assert_eq!(c.len(), expect.len());
        for (a, b) in c.times.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn slope_one_cascade() {
        let p = DiscretePath::linear(0.0, 0.01, 100, &[1.0]);
        let c = level_cascade(0.0, &[0.0], 0.2, &p, 0.0, 1.0).unwrap();
        let expect = [0.2, 0.4, 0.6, 0.8, 1.0];
        assert_eq!(c.len(), expect.len());
        for (i, b) in expect.iter().enumerate() {
            assert_abs_diff_eq!(c.times[i], *b, epsilon = 1e-9);
            assert_abs_diff_eq!(c.increments[i][0], 0.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn offset_on_sphere_hits_immediately() {
        let z = DiscretePath::zeros(0.3, 0.01, 70, 1);
        let c = level_cascade(0.3, &[0.2], 0.2, &z, 0.2, 1.0).unwrap();
        assert_abs_diff_eq!(c.times[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(c.increments[0][0], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn offset_outside_ball_is_rejected() {
        let z = DiscretePath::zeros(0.0, 0.01, 10, 1);
        assert!(level_cascade(0.0, &[0.5], 0.2, &z, 0.0, 1.0).is_err());
        assert!(level_cascade(0.0, &[0.0], 0.2, &z, 0.05, 1.0).is_err());
    }
}
