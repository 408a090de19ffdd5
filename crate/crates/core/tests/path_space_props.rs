use ppde_core::path_space::{concat, dist_dinfty, hitting_time_delta, level_cascade, shift, stop};
use ppde_core::{DiscretePath, PathPoint};
use proptest::prelude::*;

const DT: f64 = 0.05;
const N: usize = 20;

fn path_from(incs: &[f64], t0: f64) -> DiscretePath {
    let mut v = vec![0.0];
    for d in incs {
        v.push(v.last().unwrap() + d);
    }
    DiscretePath::new(t0, DT, 1, v).unwrap()
}

fn increments(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.4f64..0.4, n)
}

fn point() -> impl Strategy<Value = PathPoint> {
    (increments(N), 0..=N).prop_map(|(incs, i)| PathPoint::new(i as f64 * DT, path_from(&incs, 0.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_a_metric(a in point(), b in point(), c in point()) {
        let ab = dist_dinfty(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - dist_dinfty(&b, &a)).abs() < 1e-12);
        prop_assert!(dist_dinfty(&a, &a) == 0.0);
        prop_assert!(ab <= dist_dinfty(&a, &c) + dist_dinfty(&c, &b) + 1e-12);
    }

    #[test]
    fn stopped_copies_are_at_distance_zero(incs in increments(N), i in 0..=N) {
        let p = path_from(&incs, 0.0);
        let t = i as f64 * DT;
        let d = dist_dinfty(&PathPoint::new(t, p.clone()), &PathPoint::new(t, stop(&p, t).unwrap()));
        prop_assert!(d == 0.0);
    }

    #[test]
    fn hitting_time_lies_in_its_window(incs in increments(N), i in 0..N, delta in 0.01f64..1.5) {
        let p = path_from(&incs, 0.0);
        let t = i as f64 * DT;
        let s = shift(&p, t).unwrap();
        let h = hitting_time_delta(t, delta, &s, 1.0);
        prop_assert!(h > t && h <= (t + delta).min(1.0) + 1e-12);
    }

    #[test]
    fn hitting_time_is_monotone_in_delta(incs in increments(N), d1 in 0.01f64..1.0, d2 in 0.01f64..1.0) {
        let p = path_from(&incs, 0.0);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(hitting_time_delta(0.0, lo, &p, 1.0) <= hitting_time_delta(0.0, hi, &p, 1.0));
    }

    #[test]
    fn shift_inverts_concat(l in increments(8), r in increments(12)) {
        let left = path_from(&l, 0.0);
        let right = path_from(&r, 8.0 * DT);
        let back = shift(&concat(&left, &right).unwrap(), 8.0 * DT).unwrap();
        prop_assert_eq!(back.len(), right.len());
        for j in 0..right.len() {
            prop_assert!((back.point(j)[0] - right.point(j)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn concat_of_stop_and_shift_rebuilds(incs in increments(N), i in 1..N) {
        let p = path_from(&incs, 0.0);
        let t = i as f64 * DT;
        let head = DiscretePath::new(0.0, DT, 1, stop(&p, t).unwrap().values()[..=i].to_vec()).unwrap();
        let back = concat(&head, &shift(&p, t).unwrap()).unwrap();
        for j in 0..p.len() {
            prop_assert!((back.point(j)[0] - p.point(j)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn cascade_invariants(incs in prop::collection::vec(-0.15f64..0.15, 100), alpha in 0.05f64..0.5, x in -1.0f64..1.0) {
        let mut v = vec![0.0];
        for d in &incs {
            v.push(v.last().unwrap() + d);
        }
        let p = DiscretePath::new(0.0, 0.01, 1, v).unwrap();
        let c = level_cascade(0.0, &[x * alpha], alpha, &p, 0.0, 1.0).unwrap();
        prop_assert!(!c.is_empty());
        prop_assert!((c.times.last().unwrap() - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for (k, &t) in c.times.iter().enumerate() {
            prop_assert!(t >= prev - 1e-12 && t - prev <= alpha + 1e-9);
            // Increments reach at most one grid move past the level.
            prop_assert!(c.increments[k][0].abs() <= alpha + 0.15 + 1e-12);
            prev = t;
        }
    }

    #[test]
    fn first_hit_is_monotone_in_level(incs in prop::collection::vec(-0.15f64..0.15, 100), a1 in 0.05f64..0.5, a2 in 0.05f64..0.5) {
        let mut v = vec![0.0];
        for d in &incs {
            v.push(v.last().unwrap() + d);
        }
        let p = DiscretePath::new(0.0, 0.01, 1, v).unwrap();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let first = |a: f64| level_cascade(0.0, &[0.0], a, &p, 0.0, 1.0).unwrap().times[0];
        prop_assert!(first(lo) <= first(hi));
    }
}
