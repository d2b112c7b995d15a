use mwarp_core::manifold::SpecialEuclidean2;
use mwarp_core::registration::{align_pair, dp_cost, ds, ds_tsrvf, register, stencil};
use mwarp_core::synth::{random_trajectory, random_warp, rng, SmoothCurve};
use mwarp_core::tsrvf::{compute_tsrvf, dh, l2_norm, reconstruct, warp_action, warp_trajectory};
use mwarp_core::{Geometry, Manifold, Point, Trajectory, Tsrvf, Warp};
use nalgebra::DVector;
use proptest::prelude::*;

/// Three-point Gauss–Legendre rule, written out here rather than shared with the library.
fn segment(m: &Geometry, h1: &Tsrvf, h2: &Tsrvf, from: (usize, usize), to: (usize, usize)) -> f64 {
    let step = 1.0 / (h1.len() - 1) as f64;
    let (t0, t1) = (from.0 as f64 * step, to.0 as f64 * step);
    let (s0, s1) = (from.1 as f64 * step, to.1 as f64 * step);
    let slope = (s1 - s0) / (t1 - t0);
    let r = 0.6f64.sqrt();
    let half = 0.5 * (t1 - t0);
    [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)]
        .iter()
        .map(|&(x, w)| {
            let t = t0 + half * (1.0 + x);
            let d = h1.eval(t) - h2.eval(s0 + slope * (t - t0)) * slope.sqrt();
            w * m.inner_raw(&d, &d)
        })
        .sum::<f64>()
        * half
}

fn exhaustive(m: &Geometry, h1: &Tsrvf, h2: &Tsrvf) -> f64 {
    fn walk(m: &Geometry, h1: &Tsrvf, h2: &Tsrvf, at: (usize, usize), end: usize, steps: &[(usize, usize)]) -> f64 {
        if at == (end, end) {
            return 0.0;
        }
        steps
            .iter()
            .map(|&(a, b)| (at.0 + a, at.1 + b))
            .filter(|n| n.0 <= end && n.1 <= end)
            .map(|n| segment(m, h1, h2, at, n) + walk(m, h1, h2, n, end, steps))
            .fold(f64::INFINITY, f64::min)
    }
    walk(m, h1, h2, (0, 0), h1.len() - 1, &stencil())
}

fn geometries() -> Vec<Geometry> {
    vec![Geometry::s2(), Geometry::se2(), Geometry::qsphere(12)]
}

#[test]
fn stencil_is_the_coprime_set() {
    let s = stencil();
    assert_eq!(s.len(), 11);
    assert_eq!(s[0], (1, 1));
    assert!(s.contains(&(1, 4)) && s.contains(&(3, 4)) && !s.contains(&(2, 4)));
}

#[test]
fn dp_matches_exhaustive_search() {
    for (k, m) in geometries().into_iter().enumerate() {
        for len in [4, 5, 6] {
            for seed in 0..6u64 {
                let mut r = rng(50 * k as u64 + 10 * len as u64 + seed);
                let c = m.default_reference();
                let h1 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, len, 1.0), &c).unwrap();
                let h2 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, len, 1.0), &c).unwrap();
                let best = exhaustive(&m, &h1, &h2);
                let got = dp_cost(&m, &h1, &h2).unwrap();
                assert!((got - best).abs() <= 1e-12 * best.max(1e-12), "{:?} T={len}: {got} vs {best}", m.kind());
            }
        }
    }
}

#[test]
fn self_alignment_is_the_identity() {
    for m in geometries() {
        let mut r = rng(4);
        let a = random_trajectory(&m, &mut r, 40, 1.0);
        let h = compute_tsrvf(&m, &a, &m.default_reference()).unwrap();
        let found = align_pair(&m, &h, &h).unwrap();
        assert_eq!(found.distance, 0.0);
        assert_eq!(found.warp, Warp::identity(40));
        assert_eq!(ds_tsrvf(&m, &h, &h).unwrap(), 0.0);
    }
}

#[test]
fn alignment_never_increases_the_distance() {
    for m in geometries() {
        for seed in 0..5u64 {
            let mut r = rng(70 + seed);
            let c = m.default_reference();
            let h1 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, 50, 1.0), &c).unwrap();
            let h2 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, 50, 1.0), &c).unwrap();
            let found = align_pair(&m, &h1, &h2).unwrap();
            assert!(found.distance <= found.before);
            assert_eq!(found.before, dh(&m, &h1, &h2).unwrap());
            let direct = dh(&m, &h1, &warp_action(&h2, &found.warp).unwrap()).unwrap();
            assert!((direct - found.distance).abs() < 1e-12);
        }
    }
}

#[test]
fn register_returns_the_warped_trajectory() {
    let m = Geometry::se2();
    let mut r = rng(12);
    let curve = SmoothCurve::random(&m, &mut r, 1.0);
    let a1 = curve.sample(&m, 80);
    let gamma = random_warp(&mut r, 80, 0.5);
    let a2 = curve.sample_warped(&m, &gamma);
    let reg = register(&m, &a1, &a2, &m.default_reference()).unwrap();
    assert!(reg.alignment.warp.sup_distance(&gamma.inverse()) < 0.03);
    let expected = warp_trajectory(&m, &a2, &reg.alignment.warp).unwrap();
    assert_eq!(reg.registered, expected);
    let before = (0..80).map(|i| m.dist(a1.point(i), a2.point(i))).fold(0.0, f64::max);
    let after = (0..80).map(|i| m.dist(a1.point(i), reg.registered.point(i))).fold(0.0, f64::max);
    assert!(after < 0.5 * before, "{after} vs {before}");
}

/// Constant-speed great circle on S²: `|h| = sqrt(L)` everywhere.
#[test]
fn great_circle_tsrvf_norm() {
    let m = Geometry::s2();
    let len = 101;
    let arc = 1.3;
    let pts = (0..len)
        .map(|i| {
            let s = arc * i as f64 / (len - 1) as f64;
            Point::from_slice(&[s.cos(), 0.0, s.sin()])
        })
        .collect();
    let a = Trajectory::new(&m, pts).unwrap();
    let h = compute_tsrvf(&m, &a, &Point::from_slice(&[0.0, 0.0, 1.0])).unwrap();
    for v in h.values() {
        assert!((m.norm_raw(v) - arc.sqrt()).abs() < 1e-9);
    }
    assert!((l2_norm(&m, &h) - arc.sqrt()).abs() < 1e-9);
}

/// A pure translation in SE(2) at speed v gives `|h| = sqrt(v)`.
#[test]
fn straight_se2_motion_tsrvf_norm() {
    let m = Geometry::se2();
    let pts = (0..51).map(|i| SpecialEuclidean2::from_pose(0.4, 2.0 * i as f64 / 50.0, 0.0)).collect();
    let h = compute_tsrvf(&m, &Trajectory::new(&m, pts).unwrap(), &m.default_reference()).unwrap();
    for v in h.values() {
        assert!((m.norm_raw(v) - 2f64.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn constant_trajectory_has_zero_tsrvf() {
    for m in geometries() {
        let p = m.default_reference();
        let a = Trajectory::new(&m, vec![p.clone(); 10]).unwrap();
        let h = compute_tsrvf(&m, &a, &p).unwrap();
        assert!(h.values().iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }
}

#[test]
fn reconstruction_recovers_the_trajectory() {
    for m in geometries() {
        let mut r = rng(31);
        let a = random_trajectory(&m, &mut r, 200, 1.0);
        let c = m.default_reference();
        let back = reconstruct(&m, a.start(), &compute_tsrvf(&m, &a, &c).unwrap()).unwrap();
        let err = (0..200).map(|i| m.dist(a.point(i), back.point(i))).fold(0.0, f64::max);
        assert!(err < 5e-2, "{:?}: {err}", m.kind());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dh_is_invariant_under_a_common_warp(seed in 0u64..10_000, amp in 0.1..0.6f64) {
        for m in geometries() {
            let mut r = rng(seed);
            let c = m.default_reference();
            let h1 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, 100, 1.0), &c).unwrap();
            let h2 = compute_tsrvf(&m, &random_trajectory(&m, &mut r, 100, 1.0), &c).unwrap();
            let g = random_warp(&mut r, 100, amp);
            let d = dh(&m, &h1, &h2).unwrap();
            let dg = dh(&m, &warp_action(&h1, &g).unwrap(), &warp_action(&h2, &g).unwrap()).unwrap();
            prop_assert!((d - dg).abs() <= 0.02 * d, "{:?}: {d} vs {dg}", m.kind());
        }
    }

    #[test]
    fn ds_is_symmetric_and_nearly_warp_invariant(seed in 0u64..10_000) {
        let m = Geometry::s2();
        let mut r = rng(seed);
        let c = m.default_reference();
        let curve = SmoothCurve::random(&m, &mut r, 1.0);
        let a = curve.sample(&m, 100);
        let b = curve.perturb(&m, &mut r, 0.4).sample(&m, 100);
        prop_assert_eq!(ds(&m, &a, &b, &c).unwrap(), ds(&m, &b, &a, &c).unwrap());
        let aw = curve.sample_warped(&m, &random_warp(&mut r, 100, 0.5));
        let h = compute_tsrvf(&m, &a, &c).unwrap();
        prop_assert!(ds(&m, &a, &aw, &c).unwrap() <= 0.05 * l2_norm(&m, &h));
    }

    #[test]
    fn ds_triangle_inequality(seed in 0u64..10_000) {
        let m = Geometry::s2();
        let mut r = rng(seed);
        let c = m.default_reference();
        let root = SmoothCurve::random(&m, &mut r, 1.0);
        let t: Vec<Trajectory> = (0..3)
            .map(|_| root.perturb(&m, &mut r, 0.4).sample_warped(&m, &random_warp(&mut r, 100, 0.4)))
            .collect();
        let d = |i: usize, j: usize| ds(&m, &t[i], &t[j], &c).unwrap();
        let h = compute_tsrvf(&m, &t[0], &c).unwrap();
        let tol = 3.0 * h.values().iter().map(|v| m.norm_raw(v)).fold(0.0, f64::max) / 100.0;
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + tol);
    }
}

#[test]
fn mismatched_inputs_are_rejected() {
    let m = Geometry::s2();
    let mut r = rng(1);
    let a = random_trajectory(&m, &mut r, 20, 1.0);
    let b = random_trajectory(&m, &mut r, 21, 1.0);
    let c = m.default_reference();
    assert!(ds(&m, &a, &b, &c).is_err());
    let h1 = compute_tsrvf(&m, &a, &c).unwrap();
    let other = Point::new(DVector::from_vec(vec![1.0, 0.0, 0.0]));
    let h2 = compute_tsrvf(&m, &a, &other).unwrap();
    assert!(align_pair(&m, &h1, &h2).is_err());
}
