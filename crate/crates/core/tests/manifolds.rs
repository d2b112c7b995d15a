use mwarp_core::manifold::{geo_to_unit, PlanarCurve, PreShapeSphere, SpecialEuclidean2};
use mwarp_core::{Geometry, Manifold, Point};
use nalgebra::DVector;
use proptest::prelude::*;

fn geometries() -> Vec<Geometry> {
    vec![Geometry::s2(), Geometry::se2(), Geometry::qsphere(16)]
}

fn point(m: &Geometry, raw: &[f64]) -> Point {
    m.project(DVector::from_iterator(m.ambient_dim(), raw.iter().cycle().copied().take(m.ambient_dim())))
}

fn tangent(m: &Geometry, p: &Point, raw: &[f64], scale: f64) -> DVector<f64> {
    let v = DVector::from_iterator(m.ambient_dim(), raw.iter().rev().cycle().copied().take(m.ambient_dim()));
    m.project_tangent(p, &v) * scale
}

fn raw() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 32)
}

/// Closed-form distances, computed without the library's log maps.
fn oracle_dist(m: &Geometry, p: &Point, q: &Point) -> f64 {
    match m {
        Geometry::S2(_) | Geometry::QSphere(_) => {
            // the q-sphere carries the discrete L² product with weight 1/n
            let w = match m {
                Geometry::QSphere(_) => 2.0 / m.ambient_dim() as f64,
                _ => 1.0,
            };
            let c = w * p.0.dot(&q.0);
            (w.sqrt() * (&q.0 - &p.0 * c).norm()).atan2(c)
        }
        Geometry::Se2(_) => {
            let (t1, x1, y1) = SpecialEuclidean2::to_pose(p);
            let (t2, x2, y2) = SpecialEuclidean2::to_pose(q);
            let mut dt = (t2 - t1).rem_euclid(2.0 * std::f64::consts::PI);
            if dt > std::f64::consts::PI {
                dt -= 2.0 * std::f64::consts::PI;
            }
            (2.0 * dt * dt + (x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projected_points_are_valid(a in raw()) {
        for m in geometries() {
            let p = point(&m, &a);
            prop_assert!(m.check_point(&p).is_ok());
            let v = tangent(&m, &p, &a, 1.0);
            prop_assert!(m.check_tangent(&p, &v).is_ok());
            let again = m.project_tangent(&p, &v);
            prop_assert!((again - &v).amax() < 1e-12);
        }
    }

    #[test]
    fn exp_log_round_trip(a in raw(), scale in 0.0..2.5f64) {
        for m in geometries() {
            let p = point(&m, &a);
            let v = tangent(&m, &p, &a, 1.0);
            let n = m.norm_raw(&v);
            prop_assume!(n > 1e-6);
            let v = v * (scale / n);
            prop_assume!(m.within_injectivity(&p, &v));
            let q = m.exp_raw(&p, &v);
            prop_assert!(m.check_point(&q).is_ok());
            let back = m.log_raw(&p, &q).unwrap();
            prop_assert!(m.norm_raw(&(&back - &v)) < 1e-8, "{:?}: {back} vs {v}", m.kind());
            prop_assert!((m.dist(&p, &q) - scale).abs() < 1e-8);
        }
    }

    #[test]
    fn distance_matches_closed_form(a in raw(), b in raw()) {
        for m in geometries() {
            let (p, q) = (point(&m, &a), point(&m, &b));
            let d = m.dist(&p, &q);
            prop_assert!((d - oracle_dist(&m, &p, &q)).abs() < 1e-9, "{:?}: {d} vs {}", m.kind(), oracle_dist(&m, &p, &q));
            prop_assert!((d - m.dist(&q, &p)).abs() < 1e-12);
            if let Ok(v) = m.log_raw(&p, &q) {
                prop_assert!((m.norm_raw(&v) - d).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn triangle_inequality(a in raw(), b in raw(), c in raw()) {
        for m in geometries() {
            let (p, q, r) = (point(&m, &a), point(&m, &b), point(&m, &c));
            prop_assert!(m.dist(&p, &r) <= m.dist(&p, &q) + m.dist(&q, &r) + 1e-10);
        }
    }

    #[test]
    fn transport_is_an_isometry(a in raw(), b in raw(), c in raw()) {
        for m in geometries() {
            let (p, q) = (point(&m, &a), point(&m, &b));
            let v = tangent(&m, &p, &b, 1.0);
            let w = tangent(&m, &p, &c, 0.7);
            let (Ok(tv), Ok(tw)) = (m.transport_raw(&v, &p, &q), m.transport_raw(&w, &p, &q)) else {
                continue;
            };
            prop_assert!(m.check_tangent(&q, &tv).is_ok());
            prop_assert!((m.inner_raw(&tv, &tw) - m.inner_raw(&v, &w)).abs() < 1e-9);
            let back = m.transport_raw(&tv, &q, &p).unwrap();
            prop_assert!(m.norm_raw(&(back - &v)) < 1e-8);
        }
    }
}

#[test]
fn transport_carries_the_geodesic_direction() {
    for m in geometries() {
        let p = point(&m, &[0.3, -0.2, 0.9, 0.1, 0.5]);
        let q = point(&m, &[0.1, 0.4, 0.7, -0.3, 0.2]);
        let v = m.log_raw(&p, &q).unwrap();
        let moved = m.transport_raw(&v, &p, &q).unwrap();
        let back = m.log_raw(&q, &p).unwrap();
        assert!(m.norm_raw(&(moved + back)) < 1e-9, "{:?}", m.kind());
    }
}

#[test]
fn geographic_convention() {
    let close = |p: Point, e: [f64; 3]| (p.0 - DVector::from_row_slice(&e)).amax() < 1e-12;
    assert!(close(geo_to_unit(0.0, 0.0), [1.0, 0.0, 0.0]));
    assert!(close(geo_to_unit(90.0, 123.0), [0.0, 0.0, 1.0]));
    assert!(close(geo_to_unit(0.0, 90.0), [0.0, 1.0, 0.0]));
}

#[test]
fn q_functions_ignore_translation_and_scale() {
    let sphere = PreShapeSphere::new(48);
    let blob = |dx: f64, s: f64| {
        let pts = (0..60)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 60.0;
                let r = 1.0 + 0.3 * (3.0 * t).cos();
                [dx + s * r * t.cos(), s * r * t.sin()]
            })
            .collect();
        sphere.q_function(&PlanarCurve::new(pts).unwrap()).unwrap()
    };
    let m = Geometry::qsphere(48);
    assert!(m.dist(&blob(0.0, 1.0), &blob(5.0, 3.0)) < 1e-9);
}
