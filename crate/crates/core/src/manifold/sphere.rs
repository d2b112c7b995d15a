//! The unit 2-sphere with the metric inherited from `R^3`.
//!
//! Geographic convention: latitude φ and longitude λ (degrees) map to
//! `(cos λ cos φ, sin λ cos φ, sin φ)`.

use nalgebra::DVector;

use super::hypersphere::Hypersphere;
use super::{Manifold, ManifoldKind, Point, ZERO_SPEED};
use crate::error::Result;

const UNIT: Hypersphere = Hypersphere { weight: 1.0 };

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sphere2;

/// Converts latitude/longitude in degrees to a unit vector.
pub fn geo_to_unit(lat_deg: f64, lon_deg: f64) -> Point {
    let (phi, lambda) = (lat_deg.to_radians(), lon_deg.to_radians());
    Point::from_slice(&[
        lambda.cos() * phi.cos(),
        lambda.sin() * phi.cos(),
        phi.sin(),
    ])
}

/// Inverse of [`geo_to_unit`]; returns `(lat°, lon°)`.
pub fn unit_to_geo(p: &Point) -> (f64, f64) {
    let (x, y, z) = (p.0[0], p.0[1], p.0[2]);
    let lat = z.clamp(-1.0, 1.0).asin().to_degrees();
    let lon = y.atan2(x).to_degrees();
    (lat, lon)
}

impl Manifold for Sphere2 {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::S2
    }

    fn ambient_dim(&self) -> usize {
        3
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.len() != 3 {
            return Err(crate::Error::InvalidPoint(format!(
                "S2 point needs 3 coordinates, got {}",
                p.len()
            )));
        }
        UNIT.check_point(&p.0, 1e-10)
    }

    fn check_tangent(&self, p: &Point, v: &DVector<f64>) -> Result<()> {
        UNIT.check_tangent(&p.0, v, 1e-10)
    }

    fn project(&self, coords: DVector<f64>) -> Point {
        let n = UNIT.norm(&coords);
        if n > ZERO_SPEED && n.is_finite() {
            Point(coords / n)
        } else {
            self.default_reference()
        }
    }

    fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> DVector<f64> {
        UNIT.project_tangent(&p.0, v)
    }

    fn exp_raw(&self, p: &Point, v: &DVector<f64>) -> Point {
        UNIT.exp(p, v)
    }

    fn log_raw(&self, p: &Point, q: &Point) -> Result<DVector<f64>> {
        UNIT.log(p, q)
    }

    fn dist(&self, p: &Point, q: &Point) -> f64 {
        UNIT.dist(&p.0, &q.0)
    }

    fn transport_raw(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>> {
        UNIT.transport(v, p, q)
    }

    fn metric_sqrt_weights(&self) -> DVector<f64> {
        DVector::from_element(3, 1.0)
    }

    fn inner_raw(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        v.dot(w)
    }

    fn tangent_basis(&self, p: &Point) -> Option<Vec<DVector<f64>>> {
        // Start from the axis least aligned with p.
        let axis = (0..3)
            .min_by(|&a, &b| p.0[a].abs().total_cmp(&p.0[b].abs()))
            .unwrap_or(0);
        let mut e = DVector::zeros(3);
        e[axis] = 1.0;
        let b1 = UNIT.normalize(UNIT.project_tangent(&p.0, &e));
        let b2 = cross(&p.0, &b1);
        Some(vec![b1, b2])
    }

    /// The north pole `(0, 0, 1)`.
    fn default_reference(&self) -> Point {
        Point::from_slice(&[0.0, 0.0, 1.0])
    }

    fn within_injectivity(&self, _p: &Point, v: &DVector<f64>) -> bool {
        UNIT.within_injectivity(v)
    }
}

fn cross(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::manifold::TangentVector;
    use crate::Error;

    fn p3(x: f64, y: f64, z: f64) -> Point {
        Point::from_slice(&[x, y, z])
    }

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn quarter_circle_exp_and_log() {
        let m = Sphere2;
        let p = p3(1.0, 0.0, 0.0);
        let q = m.exp_raw(&p, &v3(0.0, FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(q.0, v3(0.0, 1.0, 0.0), epsilon = 1e-15);
        let half = m.exp_raw(&p, &(v3(0.0, PI, 0.0) * 0.5));
        assert_abs_diff_eq!(half.0, v3(0.0, 1.0, 0.0), epsilon = 1e-15);
        let v = m.log_raw(&p, &p3(0.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v, v3(0.0, FRAC_PI_2, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn zero_vector_and_identity_cases() {
        let m = Sphere2;
        let p = p3(0.0, 0.6, 0.8);
        assert_eq!(m.exp_raw(&p, &v3(0.0, 0.0, 0.0)), p);
        assert_eq!(m.exp_raw(&p, &v3(1e-13, 0.0, 0.0)), p);
        assert_eq!(m.log_raw(&p, &p).unwrap(), v3(0.0, 0.0, 0.0));
        assert_eq!(m.dist(&p, &p), 0.0);
        let v = TangentVector::new(p.clone(), v3(1.0, 0.0, 0.0));
        assert_eq!(m.transport(&v, &p, &p).unwrap().components, v.components);
    }

    #[test]
    fn distances() {
        let m = Sphere2;
        assert_eq!(m.dist(&p3(0.0, 0.0, 1.0), &p3(0.0, 0.0, 1.0)), 0.0);
        assert_abs_diff_eq!(m.dist(&p3(1.0, 0.0, 0.0), &p3(0.0, 1.0, 0.0)), FRAC_PI_2);
        assert_abs_diff_eq!(m.dist(&p3(1.0, 0.0, 0.0), &p3(-1.0, 0.0, 0.0)), PI);
    }

    #[test]
    fn antipodal_log_and_transport_fail() {
        let m = Sphere2;
        let p = p3(1.0, 0.0, 0.0);
        let q = p3(-1.0, 0.0, 0.0);
        assert!(matches!(m.log_raw(&p, &q), Err(Error::CutLocus { .. })));
        assert!(matches!(
            m.transport_raw(&v3(0.0, 1.0, 0.0), &p, &q),
            Err(Error::CutLocus { .. })
        ));
        // 1e-7 short of antipodal is still inside the refusal band.
        let near = m.exp_raw(&p, &v3(0.0, PI - 1e-7, 0.0));
        assert!(m.log_raw(&p, &near).is_err());
    }

    #[test]
    fn transport_closed_form_examples() {
        let m = Sphere2;
        let p = p3(1.0, 0.0, 0.0);
        let q = p3(0.0, 1.0, 0.0);
        // v - 2<v,q>/|p+q|^2 (p+q) with <v,q> = 1, |p+q|^2 = 2.
        let a = m.transport_raw(&v3(0.0, 1.0, 0.0), &p, &q).unwrap();
        assert_abs_diff_eq!(a, v3(-1.0, 0.0, 0.0), epsilon = 1e-15);
        // <v,q> = 0 leaves v unchanged.
        let b = m.transport_raw(&v3(0.0, 0.0, 1.0), &p, &q).unwrap();
        assert_abs_diff_eq!(b, v3(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn geographic_convention() {
        assert_abs_diff_eq!(geo_to_unit(90.0, 123.0).0, v3(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(geo_to_unit(0.0, 0.0).0, v3(1.0, 0.0, 0.0), epsilon = 1e-15);
        let (lat, lon) = unit_to_geo(&geo_to_unit(35.5, -80.25));
        assert_abs_diff_eq!(lat, 35.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lon, -80.25, epsilon = 1e-12);
    }

    #[test]
    fn basis_is_orthonormal_and_tangent() {
        let m = Sphere2;
        let p = m.project(v3(0.3, -0.2, 0.9));
        let b = m.tangent_basis(&p).unwrap();
        assert_abs_diff_eq!(b[0].dot(&p.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1].dot(&p.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[0].dot(&b[1]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1].norm(), 1.0, epsilon = 1e-15);
    }

    fn unit() -> impl Strategy<Value = Point> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 0.01)
            .prop_map(|(x, y, z)| Sphere2.project(v3(x, y, z)))
    }

    proptest! {
        #[test]
        fn geodesic_consistency(p in unit(), dir in unit(), t in 0.01f64..3.1) {
            let m = Sphere2;
            let u = m.project_tangent(&p, &dir.0);
            prop_assume!(u.norm() > 1e-3);
            let u = &u / u.norm();
            let q = m.exp_raw(&p, &(u * t));
            prop_assert!((m.dist(&p, &q) - t).abs() < 1e-10);
        }

        #[test]
        fn transport_preserves_angle_to_geodesic(p in unit(), q in unit(), w in unit()) {
            let m = Sphere2;
            prop_assume!(m.dist(&p, &q) < PI - 0.1 && m.dist(&p, &q) > 1e-3);
            let v = m.project_tangent(&p, &w.0);
            let fwd = m.log_raw(&p, &q).unwrap();
            let back = -m.log_raw(&q, &p).unwrap();
            let tv = m.transport_raw(&v, &p, &q).unwrap();
            let a = v.dot(&fwd) / fwd.norm();
            let b = tv.dot(&back) / back.norm();
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
