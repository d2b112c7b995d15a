//! SE(2) as the product SO(2) × R² with the trace metric on the rotation
//! factor and the Euclidean metric on the translation factor.
//!
//! Ambient layout of a point: `[o00, o01, o10, o11, x, y]` (rotation matrix in
//! row-major order, then translation). Tangent vectors use the same layout with
//! the rotation block `W = O·A`, `A` skew-symmetric.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix2, Vector2};

use super::{Manifold, ManifoldKind, Point, CUT_LOCUS_MARGIN, ZERO_SPEED};
use crate::error::{Error, Result};

/// Rotation blocks are re-orthonormalized once `|OᵀO - I|` exceeds this.
const ORTHO_DRIFT: f64 = 5e-11;

/// 2×2 rotation by `theta` radians.
pub fn rotation_matrix(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

const GENERATOR: Matrix2<f64> = Matrix2::new(0.0, -1.0, 1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialEuclidean2 {
    rotation_weight: f64,
}

impl Default for SpecialEuclidean2 {
    fn default() -> Self {
        SpecialEuclidean2 {
            rotation_weight: 1.0,
        }
    }
}

impl SpecialEuclidean2 {
    /// Product metric `w·trace(X₁ᵀX₂) + u₁·u₂`; `w` must be positive.
    pub fn with_rotation_weight(w: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rotation weight must be positive, got {w}"
            )));
        }
        Ok(SpecialEuclidean2 { rotation_weight: w })
    }

    pub fn rotation_weight(&self) -> f64 {
        self.rotation_weight
    }

    pub fn from_pose(theta: f64, x: f64, y: f64) -> Point {
        Self::compose(&rotation_matrix(theta), &Vector2::new(x, y))
    }

    /// `(theta, x, y)` with theta in `(-π, π]`.
    pub fn to_pose(p: &Point) -> (f64, f64, f64) {
        let o = Self::rotation(p);
        (o[(1, 0)].atan2(o[(0, 0)]), p.0[4], p.0[5])
    }

    pub fn rotation(p: &Point) -> Matrix2<f64> {
        Matrix2::new(p.0[0], p.0[1], p.0[2], p.0[3])
    }

    pub fn translation(p: &Point) -> Vector2<f64> {
        Vector2::new(p.0[4], p.0[5])
    }

    fn compose(o: &Matrix2<f64>, x: &Vector2<f64>) -> Point {
        Point::from_slice(&[o[(0, 0)], o[(0, 1)], o[(1, 0)], o[(1, 1)], x[0], x[1]])
    }

    fn tangent(w: &Matrix2<f64>, u: &Vector2<f64>) -> DVector<f64> {
        DVector::from_vec(vec![w[(0, 0)], w[(0, 1)], w[(1, 0)], w[(1, 1)], u[0], u[1]])
    }

    fn split_tangent(v: &DVector<f64>) -> (Matrix2<f64>, Vector2<f64>) {
        (
            Matrix2::new(v[0], v[1], v[2], v[3]),
            Vector2::new(v[4], v[5]),
        )
    }

    /// Nearest rotation in the Frobenius sense (polar factor restricted to det = +1).
    fn polar(m: &Matrix2<f64>) -> Matrix2<f64> {
        rotation_matrix((m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]))
    }

    fn orthonormal(o: Matrix2<f64>) -> Matrix2<f64> {
        let drift = (o.transpose() * o - Matrix2::identity()).abs().max();
        if drift > ORTHO_DRIFT {
            Self::polar(&o)
        } else {
            o
        }
    }

    /// Angular speed of the rotation block of `v` at rotation `o`.
    fn angular(o: &Matrix2<f64>, w: &Matrix2<f64>) -> f64 {
        let a = o.transpose() * w;
        0.5 * (a[(1, 0)] - a[(0, 1)])
    }

    /// Principal relative angle of `q` seen from `p`, in `(-π, π]`.
    pub fn relative_angle(p: &Point, q: &Point) -> f64 {
        let r = Self::rotation(p).transpose() * Self::rotation(q);
        r[(1, 0)].atan2(r[(0, 0)])
    }
}

impl Manifold for SpecialEuclidean2 {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Se2
    }

    fn ambient_dim(&self) -> usize {
        6
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.len() != 6 || p.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint(
                "SE(2) point needs 6 finite coordinates".into(),
            ));
        }
        let o = Self::rotation(p);
        let drift = (o.transpose() * o - Matrix2::identity()).abs().max();
        if drift > 1e-10 || (o.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPoint(format!(
                "rotation block is not in SO(2) (drift {drift:e})"
            )));
        }
        Ok(())
    }

    fn check_tangent(&self, p: &Point, v: &DVector<f64>) -> Result<()> {
        if v.len() != 6 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidTangent(
                "SE(2) tangent needs 6 finite components".into(),
            ));
        }
        let (w, _) = Self::split_tangent(v);
        let a = Self::rotation(p).transpose() * w;
        let asym = (a + a.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + a.abs().max()) {
            return Err(Error::InvalidTangent(format!(
                "rotation block is not O·skew (symmetric part {asym:e})"
            )));
        }
        Ok(())
    }

    fn project(&self, coords: DVector<f64>) -> Point {
        let o = Self::polar(&Matrix2::new(coords[0], coords[1], coords[2], coords[3]));
        Self::compose(&o, &Vector2::new(coords[4], coords[5]))
    }

    fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> DVector<f64> {
        let o = Self::rotation(p);
        let (w, u) = Self::split_tangent(v);
        let a = o.transpose() * w;
        let skew = (a - a.transpose()) * 0.5;
        Self::tangent(&(o * skew), &u)
    }

    fn exp_raw(&self, p: &Point, v: &DVector<f64>) -> Point {
        let o = Self::rotation(p);
        let (w, u) = Self::split_tangent(v);
        let omega = Self::angular(&o, &w);
        let rot = if omega.abs() < ZERO_SPEED {
            o
        } else {
            Self::orthonormal(o * rotation_matrix(omega))
        };
        Self::compose(&rot, &(Self::translation(p) + u))
    }

    fn log_raw(&self, p: &Point, q: &Point) -> Result<DVector<f64>> {
        let dtheta = Self::relative_angle(p, q);
        if PI - dtheta.abs() < CUT_LOCUS_MARGIN {
            return Err(Error::cut_locus(self.dist(p, q)));
        }
        let w = Self::rotation(p) * GENERATOR * dtheta;
        let u = Self::translation(q) - Self::translation(p);
        Ok(Self::tangent(&w, &u))
    }

    fn dist(&self, p: &Point, q: &Point) -> f64 {
        let dtheta = Self::relative_angle(p, q);
        let dx = Self::translation(q) - Self::translation(p);
        (2.0 * self.rotation_weight * dtheta * dtheta + dx.norm_squared()).sqrt()
    }

    /// Left translation of the rotation block (`O_q O_pᵀ W`); the translation
    /// block is carried unchanged. Globally defined.
    fn transport_raw(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>> {
        let (w, u) = Self::split_tangent(v);
        let w = Self::rotation(q) * Self::rotation(p).transpose() * w;
        Ok(Self::tangent(&w, &u))
    }

    fn metric_sqrt_weights(&self) -> DVector<f64> {
        let r = self.rotation_weight.sqrt();
        DVector::from_vec(vec![r, r, r, r, 1.0, 1.0])
    }

    fn tangent_basis(&self, p: &Point) -> Option<Vec<DVector<f64>>> {
        let o = Self::rotation(p);
        let scale = 1.0 / (2.0 * self.rotation_weight).sqrt();
        Some(vec![
            Self::tangent(&(o * GENERATOR * scale), &Vector2::zeros()),
            Self::tangent(&Matrix2::zeros(), &Vector2::new(1.0, 0.0)),
            Self::tangent(&Matrix2::zeros(), &Vector2::new(0.0, 1.0)),
        ])
    }

    /// Identity rotation with zero translation.
    fn default_reference(&self) -> Point {
        Self::from_pose(0.0, 0.0, 0.0)
    }

    fn within_injectivity(&self, p: &Point, v: &DVector<f64>) -> bool {
        let (w, _) = Self::split_tangent(v);
        Self::angular(&Self::rotation(p), &w).abs() < PI - CUT_LOCUS_MARGIN
    }
}
