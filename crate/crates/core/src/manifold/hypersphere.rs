//! Great-circle formulas for a unit sphere in `R^k` under the scaled inner
//! product `<a, b> = w * a.b`. The 2-sphere uses `w = 1`; the q-sphere uses the
//! quadrature weight `1/n` of its discrete L² product.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{Point, CUT_LOCUS_MARGIN, ZERO_SPEED};
use crate::error::{Error, Result};

/// Drift in the squared norm tolerated before re-projecting onto the sphere.
const DRIFT: f64 = 5e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Hypersphere {
    pub weight: f64,
}

impl Hypersphere {
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.weight * a.dot(b)
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn normalize(&self, v: DVector<f64>) -> DVector<f64> {
        let n = self.norm(&v);
        v / n
    }

    pub fn renormalize(&self, v: DVector<f64>) -> DVector<f64> {
        if (self.inner(&v, &v) - 1.0).abs() > DRIFT {
            self.normalize(v)
        } else {
            v
        }
    }

    pub fn project_tangent(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v - p * self.inner(p, v)
    }

    pub fn check_point(&self, p: &DVector<f64>, tol: f64) -> Result<()> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        let n = self.norm(p);
        if (n - 1.0).abs() > tol {
            return Err(Error::InvalidPoint(format!("norm {n} is not 1")));
        }
        Ok(())
    }

    pub fn check_tangent(&self, p: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<()> {
        if v.len() != p.len() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidTangent("wrong length or non-finite".into()));
        }
        let c = self.inner(p, v);
        if c.abs() > tol * (1.0 + self.norm(v)) {
            return Err(Error::InvalidTangent(format!("<v, p> = {c:e}")));
        }
        Ok(())
    }

    /// Angle between two unit vectors, `2 atan2(|p - q|, |p + q|)`: exactly
    /// symmetric and accurate for tiny and near-antipodal separations.
    pub fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> f64 {
        if p == q {
            return 0.0;
        }
        2.0 * self.norm(&(p - q)).atan2(self.norm(&(p + q)))
    }

    pub fn exp(&self, p: &Point, v: &DVector<f64>) -> Point {
        let t = self.norm(v);
        if t < ZERO_SPEED {
            return p.clone();
        }
        let out = &p.0 * t.cos() + v * (t.sin() / t);
        Point(self.renormalize(out))
    }

    pub fn log(&self, p: &Point, q: &Point) -> Result<DVector<f64>> {
        if p.0 == q.0 {
            return Ok(DVector::zeros(p.0.len()));
        }
        let c = self.inner(&p.0, &q.0).clamp(-1.0, 1.0);
        let u = &q.0 - &p.0 * c;
        let s = self.norm(&u);
        let theta = s.atan2(c);
        if PI - theta < CUT_LOCUS_MARGIN {
            return Err(Error::cut_locus(theta));
        }
        if s < f64::MIN_POSITIVE {
            return Ok(DVector::zeros(p.0.len()));
        }
        Ok(u * (theta / s))
    }

    /// `v - 2<v,q>/|p+q|^2 (p+q)`, the transport along the great circle from p to q.
    pub fn transport(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>> {
        if p.0 == q.0 {
            return Ok(v.clone());
        }
        let theta = self.dist(&p.0, &q.0);
        if PI - theta < CUT_LOCUS_MARGIN {
            return Err(Error::cut_locus(theta));
        }
        let s = &p.0 + &q.0;
        let denom = self.inner(&s, &s);
        let out = v - &s * (2.0 * self.inner(v, &q.0) / denom);
        Ok(self.project_tangent(&q.0, &out))
    }

    pub fn within_injectivity(&self, v: &DVector<f64>) -> bool {
        self.norm(v) < PI - CUT_LOCUS_MARGIN
    }
}
