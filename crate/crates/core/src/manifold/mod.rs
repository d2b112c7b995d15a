//! Riemannian geometry layer.
//!
//! Every geometry works in ambient (embedded) coordinates: a point is a flat
//! coordinate vector and a tangent vector is a coordinate vector of the same
//! length that satisfies the geometry's tangency constraint at its base point.
//! All three metrics used here are diagonal in those coordinates, which is what
//! [`Manifold::metric_sqrt_weights`] exposes.

mod hypersphere;
mod qsphere;
mod se2;
mod sphere;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use qsphere::{rotation_align, PlanarCurve, PreShapeSphere, DEFAULT_CONTOUR_SAMPLES};
pub use se2::{rotation_matrix, SpecialEuclidean2};
pub use sphere::{geo_to_unit, unit_to_geo, Sphere2};

/// Points closer than this to the cut-locus distance are rejected.
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

/// Tolerance used when checking that a tangent vector's base matches a point.
pub const BASE_TOLERANCE: f64 = 1e-10;

/// Speeds below this are treated as zero.
pub const ZERO_SPEED: f64 = 1e-12;

/// A point on a manifold, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub DVector<f64>);

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Point(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Point(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the coordinates agree with `other` to [`BASE_TOLERANCE`].
    pub fn same_as(&self, other: &Point) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|(a, b)| (a - b).abs() <= BASE_TOLERANCE)
    }
}

/// A tangent vector together with the point it is attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: Point, components: DVector<f64>) -> Self {
        TangentVector { base, components }
    }

    pub fn zero(base: &Point) -> Self {
        TangentVector {
            base: base.clone(),
            components: DVector::zeros(base.len()),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        TangentVector {
            base: self.base.clone(),
            components: &self.components * s,
        }
    }
}

/// Which concrete geometry a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    #[serde(rename = "s2")]
    S2,
    #[serde(rename = "se2")]
    Se2,
    #[serde(rename = "qsphere")]
    QSphere,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifoldKind::S2 => "s2",
            ManifoldKind::Se2 => "se2",
            ManifoldKind::QSphere => "qsphere",
        })
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2" => Ok(ManifoldKind::S2),
            "se2" => Ok(ManifoldKind::Se2),
            "qsphere" => Ok(ManifoldKind::QSphere),
            other => Err(Error::InvalidArgument(format!("unknown manifold '{other}'"))),
        }
    }
}

/// The Riemannian operations every geometry provides.
///
/// The `*_raw` methods work on bare coordinate vectors and skip the
/// base-point bookkeeping; the checked methods (`exp`, `log`, `transport`,
/// `inner`) take [`TangentVector`]s and fail fast with
/// [`Error::BaseMismatch`] when a vector is attached to the wrong point.
pub trait Manifold: Send + Sync {
    fn kind(&self) -> ManifoldKind;

    /// Length of the ambient coordinate vector of a point.
    fn ambient_dim(&self) -> usize;

    /// Validates a point against the geometry's constraint set.
    fn check_point(&self, p: &Point) -> Result<()>;

    /// Validates that `v` is tangent at `p`.
    fn check_tangent(&self, p: &Point, v: &DVector<f64>) -> Result<()>;

    /// Projects arbitrary ambient coordinates back onto the manifold. Points
    /// with no nearest manifold point map to the default reference.
    fn project(&self, coords: DVector<f64>) -> Point;

    /// Projects ambient coordinates onto the tangent space at `p`.
    fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> DVector<f64>;

    fn exp_raw(&self, p: &Point, v: &DVector<f64>) -> Point;

    fn log_raw(&self, p: &Point, q: &Point) -> Result<DVector<f64>>;

    fn dist(&self, p: &Point, q: &Point) -> f64;

    /// Parallel transport of `v` (tangent at `p`) along the shortest geodesic to `q`.
    fn transport_raw(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>>;

    /// Square roots of the diagonal metric weights: `inner(v, w) = Σ (s_k v_k)(s_k w_k)`.
    fn metric_sqrt_weights(&self) -> DVector<f64>;

    /// Orthonormal basis of `T_p M` in ambient coordinates, or `None` when the
    /// tangent space is too large to enumerate and callers should build a
    /// data-driven basis instead.
    fn tangent_basis(&self, p: &Point) -> Option<Vec<DVector<f64>>>;

    /// Reference point used when nothing else is configured.
    fn default_reference(&self) -> Point;

    /// Whether `log(p, exp(p, v)) == v`, i.e. `v` lies inside the injectivity domain.
    fn within_injectivity(&self, p: &Point, v: &DVector<f64>) -> bool;

    fn inner_raw(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let s = self.metric_sqrt_weights();
        v.iter()
            .zip(w.iter())
            .zip(s.iter())
            .map(|((a, b), s)| a * b * s * s)
            .sum()
    }

    fn norm_raw(&self, v: &DVector<f64>) -> f64 {
        self.inner_raw(v, v).max(0.0).sqrt()
    }

    fn exp(&self, p: &Point, v: &TangentVector) -> Result<Point> {
        ensure_base(p, v)?;
        Ok(self.exp_raw(p, &v.components))
    }

    fn log(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        Ok(TangentVector::new(p.clone(), self.log_raw(p, q)?))
    }

    fn transport(&self, v: &TangentVector, p: &Point, q: &Point) -> Result<TangentVector> {
        ensure_base(p, v)?;
        Ok(TangentVector::new(
            q.clone(),
            self.transport_raw(&v.components, p, q)?,
        ))
    }

    fn inner(&self, p: &Point, v: &TangentVector, w: &TangentVector) -> Result<f64> {
        ensure_base(p, v)?;
        ensure_base(p, w)?;
        Ok(self.inner_raw(&v.components, &w.components))
    }

    fn norm(&self, p: &Point, v: &TangentVector) -> Result<f64> {
        ensure_base(p, v)?;
        Ok(self.norm_raw(&v.components))
    }

    /// Point at fraction `s` along the shortest geodesic from `p` to `q`.
    fn interpolate(&self, p: &Point, q: &Point, s: f64) -> Result<Point> {
        if s <= 0.0 {
            return Ok(p.clone());
        }
        if s >= 1.0 {
            return Ok(q.clone());
        }
        let v = self.log_raw(p, q)?;
        Ok(self.exp_raw(p, &(v * s)))
    }
}

fn ensure_base(p: &Point, v: &TangentVector) -> Result<()> {
    if v.base.same_as(p) {
        Ok(())
    } else {
        Err(Error::BaseMismatch)
    }
}

/// Runtime-selected geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    S2(Sphere2),
    Se2(SpecialEuclidean2),
    QSphere(PreShapeSphere),
}

macro_rules! delegate {
    ($self:ident, $g:ident => $e:expr) => {
        match $self {
            Geometry::S2($g) => $e,
            Geometry::Se2($g) => $e,
            Geometry::QSphere($g) => $e,
        }
    };
}

impl Manifold for Geometry {
    fn kind(&self) -> ManifoldKind {
        delegate!(self, g => g.kind())
    }
    fn ambient_dim(&self) -> usize {
        delegate!(self, g => g.ambient_dim())
    }
    fn check_point(&self, p: &Point) -> Result<()> {
        delegate!(self, g => g.check_point(p))
    }
    fn check_tangent(&self, p: &Point, v: &DVector<f64>) -> Result<()> {
        delegate!(self, g => g.check_tangent(p, v))
    }
    fn project(&self, coords: DVector<f64>) -> Point {
        delegate!(self, g => g.project(coords))
    }
    fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> DVector<f64> {
        delegate!(self, g => g.project_tangent(p, v))
    }
    fn exp_raw(&self, p: &Point, v: &DVector<f64>) -> Point {
        delegate!(self, g => g.exp_raw(p, v))
    }
    fn log_raw(&self, p: &Point, q: &Point) -> Result<DVector<f64>> {
        delegate!(self, g => g.log_raw(p, q))
    }
    fn dist(&self, p: &Point, q: &Point) -> f64 {
        delegate!(self, g => g.dist(p, q))
    }
    fn transport_raw(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>> {
        delegate!(self, g => g.transport_raw(v, p, q))
    }
    fn metric_sqrt_weights(&self) -> DVector<f64> {
        delegate!(self, g => g.metric_sqrt_weights())
    }
    fn inner_raw(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        delegate!(self, g => g.inner_raw(v, w))
    }
    fn tangent_basis(&self, p: &Point) -> Option<Vec<DVector<f64>>> {
        delegate!(self, g => g.tangent_basis(p))
    }
    fn default_reference(&self) -> Point {
        delegate!(self, g => g.default_reference())
    }
    fn within_injectivity(&self, p: &Point, v: &DVector<f64>) -> bool {
        delegate!(self, g => g.within_injectivity(p, v))
    }
}

impl Geometry {
    pub fn s2() -> Self {
        Geometry::S2(Sphere2)
    }

    pub fn se2() -> Self {
        Geometry::Se2(SpecialEuclidean2::default())
    }

    pub fn qsphere(samples: usize) -> Self {
        Geometry::QSphere(PreShapeSphere::new(samples))
    }

    /// Encodes a point in the interchange representation: `[x, y, z]` on S²,
    /// `[theta, x, y]` on SE(2) and `[[qx, qy], ...]` on the q-sphere.
    pub fn encode_point(&self, p: &Point) -> serde_json::Value {
        use serde_json::json;
        match self {
            Geometry::S2(_) => json!([p.0[0], p.0[1], p.0[2]]),
            Geometry::Se2(_) => {
                let (theta, x, y) = SpecialEuclidean2::to_pose(p);
                json!([theta, x, y])
            }
            Geometry::QSphere(_) => serde_json::Value::Array(
                p.0.as_slice()
                    .chunks(2)
                    .map(|c| json!([c[0], c[1]]))
                    .collect(),
            ),
        }
    }

    /// Inverse of [`Geometry::encode_point`]; validates the result.
    pub fn decode_point(&self, value: &serde_json::Value) -> Result<Point> {
        let bad = || Error::InvalidPoint(format!("cannot decode {value} as a {} point", self.kind()));
        let numbers = |v: &serde_json::Value| -> Option<Vec<f64>> {
            v.as_array()?.iter().map(|x| x.as_f64()).collect()
        };
        let p = match self {
            Geometry::S2(_) => {
                let c = numbers(value).filter(|c| c.len() == 3).ok_or_else(bad)?;
                Point::from_slice(&c)
            }
            Geometry::Se2(_) => {
                let c = numbers(value).filter(|c| c.len() == 3).ok_or_else(bad)?;
                SpecialEuclidean2::from_pose(c[0], c[1], c[2])
            }
            Geometry::QSphere(q) => {
                let rows = value.as_array().ok_or_else(bad)?;
                if rows.len() != q.samples() {
                    return Err(bad());
                }
                let mut flat = Vec::with_capacity(2 * rows.len());
                for r in rows {
                    let c = numbers(r).filter(|c| c.len() == 2).ok_or_else(bad)?;
                    flat.extend_from_slice(&c);
                }
                Point::from_slice(&flat)
            }
        };
        self.check_point(&p)?;
        Ok(p)
    }
}

/// Serialized form of a [`Geometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GeometrySpec {
    #[serde(rename = "s2")]
    S2,
    #[serde(rename = "se2")]
    Se2 { rotation_weight: f64 },
    #[serde(rename = "qsphere")]
    QSphere { samples: usize },
}

impl From<&Geometry> for GeometrySpec {
    fn from(g: &Geometry) -> Self {
        match g {
            Geometry::S2(_) => GeometrySpec::S2,
            Geometry::Se2(s) => GeometrySpec::Se2 {
                rotation_weight: s.rotation_weight(),
            },
            Geometry::QSphere(q) => GeometrySpec::QSphere {
                samples: q.samples(),
            },
        }
    }
}

impl TryFrom<GeometrySpec> for Geometry {
    type Error = Error;

    fn try_from(spec: GeometrySpec) -> Result<Self> {
        Ok(match spec {
            GeometrySpec::S2 => Geometry::S2(Sphere2),
            GeometrySpec::Se2 { rotation_weight } => {
                Geometry::Se2(SpecialEuclidean2::with_rotation_weight(rotation_weight)?)
            }
            GeometrySpec::QSphere { samples } => {
                if samples < qsphere::MIN_CONTOUR_SAMPLES {
                    return Err(Error::InvalidArgument(format!(
                        "q-sphere needs at least {} samples",
                        qsphere::MIN_CONTOUR_SAMPLES
                    )));
                }
                Geometry::QSphere(PreShapeSphere::new(samples))
            }
        })
    }
}

/// Gram–Schmidt completion of `basis` with projected coordinate axes until it
/// holds `target` orthonormal tangent vectors at `p`.
pub fn complete_tangent_basis<M: Manifold + ?Sized>(
    m: &M,
    p: &Point,
    mut basis: Vec<DVector<f64>>,
    target: usize,
) -> Vec<DVector<f64>> {
    let dim = m.ambient_dim();
    let mut axis = 0;
    while basis.len() < target && axis < dim {
        let mut e = DVector::zeros(dim);
        e[axis] = 1.0;
        axis += 1;
        let mut v = m.project_tangent(p, &e);
        for b in &basis {
            let c = m.inner_raw(&v, b);
            v -= b * c;
        }
        let n = m.norm_raw(&v);
        if n > 1e-8 {
            basis.push(v / n);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checked_ops_reject_foreign_base() {
        let m = Geometry::s2();
        let p = Point::from_slice(&[1.0, 0.0, 0.0]);
        let q = Point::from_slice(&[0.0, 1.0, 0.0]);
        let v = TangentVector::new(q.clone(), DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!(matches!(m.exp(&p, &v), Err(Error::BaseMismatch)));
        assert!(matches!(m.transport(&v, &p, &q), Err(Error::BaseMismatch)));
        assert!(matches!(m.inner(&p, &v, &v), Err(Error::BaseMismatch)));
    }

    #[test]
    fn geometry_spec_round_trip() {
        for g in [Geometry::s2(), Geometry::se2(), Geometry::qsphere(16)] {
            let spec = GeometrySpec::from(&g);
            let json = serde_json::to_string(&spec).unwrap();
            let back = Geometry::try_from(serde_json::from_str::<GeometrySpec>(&json).unwrap()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn point_encoding_round_trip() {
        let g = Geometry::se2();
        let p = SpecialEuclidean2::from_pose(0.3, 1.0, -2.0);
        let back = g.decode_point(&g.encode_point(&p)).unwrap();
        assert!(back.same_as(&p));
        assert!(g.decode_point(&serde_json::json!([1.0, 2.0])).is_err());
    }

    #[test]
    fn completed_basis_is_orthonormal() {
        let g = Geometry::qsphere(8);
        let p = g.default_reference();
        let basis = complete_tangent_basis(&g, &p, Vec::new(), 5);
        assert_eq!(basis.len(), 5);
        for (i, a) in basis.iter().enumerate() {
            assert!(g.inner_raw(a, &p.0).abs() < 1e-12);
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g.inner_raw(a, b) - expect).abs() < 1e-12);
            }
        }
    }
}
