//! Trajectories, their transported square-root vector fields, the L² distance
//! between TSRVFs and the action of time warps on both.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldKind, Point, TangentVector, ZERO_SPEED};
use crate::warp::{grid, locate, Warp};

/// Minimum number of samples in a trajectory.
pub const MIN_SAMPLES: usize = 3;

/// A path sampled at the uniform times `t_i = i / (T - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: ManifoldKind,
    points: Vec<Point>,
}

impl Trajectory {
    /// Validates every point and rejects consecutive cut-locus pairs.
    pub fn new<M: Manifold + ?Sized>(m: &M, points: Vec<Point>) -> Result<Self> {
        if points.len() < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "trajectory has {} samples, need at least {MIN_SAMPLES}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            m.check_point(p)
                .map_err(|e| Error::InvalidPoint(format!("sample {i}: {e}")))?;
        }
        for (i, w) in points.windows(2).enumerate() {
            m.log_raw(&w[0], &w[1]).map_err(|e| e.at_index(i))?;
        }
        Ok(Trajectory {
            kind: m.kind(),
            points,
        })
    }

    /// Builds a trajectory from points produced by manifold operations.
    pub(crate) fn from_parts(kind: ManifoldKind, points: Vec<Point>) -> Self {
        Trajectory { kind, points }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        grid(self.points.len())
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.points.len() - 1) as f64
    }

    pub fn start(&self) -> &Point {
        &self.points[0]
    }

    pub(crate) fn ensure_kind<M: Manifold + ?Sized>(&self, m: &M) -> Result<()> {
        if self.kind != m.kind() {
            return Err(Error::MismatchedManifold {
                expected: m.kind().to_string(),
                found: self.kind.to_string(),
            });
        }
        Ok(())
    }
}

/// A TSRVF: one tangent vector at the reference point per sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Tsrvf {
    reference: Point,
    values: Vec<DVector<f64>>,
}

impl Tsrvf {
    pub fn new<M: Manifold + ?Sized>(m: &M, reference: Point, values: Vec<DVector<f64>>) -> Result<Self> {
        m.check_point(&reference)?;
        if values.len() < 2 {
            return Err(Error::InsufficientData("TSRVF needs at least two samples".into()));
        }
        for (i, v) in values.iter().enumerate() {
            m.check_tangent(&reference, v)
                .map_err(|e| Error::InvalidTangent(format!("sample {i}: {e}")))?;
        }
        Ok(Tsrvf { reference, values })
    }

    pub(crate) fn from_parts(reference: Point, values: Vec<DVector<f64>>) -> Self {
        Tsrvf { reference, values }
    }

    pub fn zeros(reference: Point, len: usize) -> Self {
        let d = reference.len();
        Tsrvf {
            reference,
            values: vec![DVector::zeros(d); len],
        }
    }

    pub fn reference(&self) -> &Point {
        &self.reference
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize) -> TangentVector {
        TangentVector::new(self.reference.clone(), self.values[i].clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation at `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (k, f) = locate(t, self.values.len());
        &self.values[k] * (1.0 - f) + &self.values[k + 1] * f
    }

    /// Pointwise average of TSRVFs sharing a reference, summed in input order.
    pub fn mean(items: &[Tsrvf]) -> Result<Tsrvf> {
        let first = items
            .first()
            .ok_or_else(|| Error::InsufficientData("mean of zero TSRVFs".into()))?;
        let mut acc = first.values.clone();
        for h in &items[1..] {
            ensure_compatible(first, h)?;
            for (a, v) in acc.iter_mut().zip(&h.values) {
                *a += v;
            }
        }
        let scale = 1.0 / items.len() as f64;
        for a in &mut acc {
            *a *= scale;
        }
        Ok(Tsrvf::from_parts(first.reference.clone(), acc))
    }
}

fn ensure_compatible(a: &Tsrvf, b: &Tsrvf) -> Result<()> {
    if !a.reference.same_as(&b.reference) {
        return Err(Error::MismatchedReference);
    }
    if a.values.len() != b.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "TSRVF lengths {} and {}",
            a.values.len(),
            b.values.len()
        )));
    }
    Ok(())
}

/// Trapezoid weights on the uniform grid of `len` samples.
pub(crate) fn trapezoid_weights(len: usize) -> Vec<f64> {
    let h = 1.0 / (len - 1) as f64;
    (0..len)
        .map(|i| if i == 0 || i == len - 1 { 0.5 * h } else { h })
        .collect()
}

/// Intrinsic velocity estimate at every sample: central log-map differences
/// inside, one-sided at the ends.
pub fn velocities<M: Manifold + ?Sized>(m: &M, alpha: &Trajectory) -> Result<Vec<DVector<f64>>> {
    let pts = alpha.points();
    let n = pts.len();
    let h = alpha.step();
    (0..n)
        .map(|i| {
            let v = if i == 0 {
                m.log_raw(&pts[0], &pts[1])? / h
            } else if i == n - 1 {
                -m.log_raw(&pts[n - 1], &pts[n - 2])? / h
            } else {
                (m.log_raw(&pts[i], &pts[i + 1])? - m.log_raw(&pts[i], &pts[i - 1])?) / (2.0 * h)
            };
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()
}

/// `h(t_i) = (α̇(t_i))_{α(t_i)→c} / sqrt(|α̇(t_i)|)`, with `h = 0` where the
/// speed vanishes.
pub fn compute_tsrvf<M: Manifold + ?Sized>(m: &M, alpha: &Trajectory, c: &Point) -> Result<Tsrvf> {
    alpha.ensure_kind(m)?;
    let vel = velocities(m, alpha)?;
    let values = vel
        .iter()
        .zip(alpha.points())
        .enumerate()
        .map(|(i, (v, p))| {
            let speed = m.norm_raw(v);
            if speed < ZERO_SPEED {
                return Ok(DVector::zeros(v.len()));
            }
            let moved = m.transport_raw(v, p, c).map_err(|e| e.at_index(i))?;
            Ok(moved / speed.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tsrvf::from_parts(c.clone(), values))
}

/// Integral curve `β̇ = |V| V` with `V(t) = h(t)` transported from `c` to
/// `β(t)`, started at `start`. One geodesic midpoint step per grid interval:
/// a half step to `q*`, then a full step from `q_k` along the field at `q*`
/// (built from the interval's mean TSRVF and transported back to `q_k`).
pub fn reconstruct<M: Manifold + ?Sized>(m: &M, start: &Point, h: &Tsrvf) -> Result<Trajectory> {
    m.check_point(start)?;
    let n = h.len();
    let dt = 1.0 / (n - 1) as f64;
    let field = |v: &DVector<f64>, p: &Point, k: usize| -> Result<DVector<f64>> {
        let moved = m.transport_raw(v, &h.reference, p).map_err(|e| e.at_index(k))?;
        let speed = m.norm_raw(&moved);
        Ok(moved * speed)
    };
    let mut points = Vec::with_capacity(n);
    points.push(start.clone());
    for k in 0..n - 1 {
        let here = &points[k];
        let half = m.exp_raw(here, &(field(&h.values[k], here, k)? * (0.5 * dt)));
        let mid = (&h.values[k] + &h.values[k + 1]) * 0.5;
        let slope = m.transport_raw(&field(&mid, &half, k)?, &half, here).map_err(|e| e.at_index(k))?;
        let next = m.exp_raw(here, &(slope * dt));
        points.push(next);
    }
    Ok(Trajectory::from_parts(m.kind(), points))
}

/// L² distance between two TSRVFs (trapezoid rule on the sample grid).
pub fn dh<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf) -> Result<f64> {
    ensure_compatible(h1, h2)?;
    let w = trapezoid_weights(h1.len());
    let sum: f64 = h1
        .values
        .iter()
        .zip(&h2.values)
        .zip(&w)
        .map(|((a, b), w)| {
            let d = a - b;
            w * m.inner_raw(&d, &d)
        })
        .sum();
    Ok(sum.max(0.0).sqrt())
}

/// L² norm of a TSRVF.
pub fn l2_norm<M: Manifold + ?Sized>(m: &M, h: &Tsrvf) -> f64 {
    let w = trapezoid_weights(h.len());
    h.values
        .iter()
        .zip(&w)
        .map(|(v, w)| w * m.inner_raw(v, v))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// `(h, γ)(t) = h(γ(t)) sqrt(γ̇(t))`.
pub fn warp_action(h: &Tsrvf, gamma: &Warp) -> Result<Tsrvf> {
    if gamma.len() != h.len() {
        return Err(Error::ShapeMismatch(format!(
            "warp has {} samples, TSRVF has {}",
            gamma.len(),
            h.len()
        )));
    }
    let rate = gamma.derivative();
    let values = gamma
        .values()
        .iter()
        .zip(&rate)
        .map(|(&s, &r)| h.eval(s) * r.sqrt())
        .collect();
    Ok(Tsrvf::from_parts(h.reference.clone(), values))
}

/// `α ∘ γ`, evaluating α between samples along the connecting geodesic.
pub fn warp_trajectory<M: Manifold + ?Sized>(m: &M, alpha: &Trajectory, gamma: &Warp) -> Result<Trajectory> {
    alpha.ensure_kind(m)?;
    if gamma.len() != alpha.len() {
        return Err(Error::ShapeMismatch(format!(
            "warp has {} samples, trajectory has {}",
            gamma.len(),
            alpha.len()
        )));
    }
    let pts = alpha.points();
    let points = gamma
        .values()
        .iter()
        .map(|&s| evaluate(m, pts, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::from_parts(alpha.kind, points))
}

/// Geodesic interpolation of uniformly sampled points at `s ∈ [0, 1]`.
pub(crate) fn evaluate<M: Manifold + ?Sized>(m: &M, pts: &[Point], s: f64) -> Result<Point> {
    let (k, f) = locate(s, pts.len());
    if f < 1e-12 {
        return Ok(pts[k].clone());
    }
    if f > 1.0 - 1e-12 {
        return Ok(pts[k + 1].clone());
    }
    m.interpolate(&pts[k], &pts[k + 1], f).map_err(|e| e.at_index(k))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::manifold::{Geometry, SpecialEuclidean2, Sphere2};

    fn arc(n: usize, length: f64) -> Trajectory {
        // Great circle in the equatorial plane, unit speed times `length`.
        let pts = grid(n)
            .into_iter()
            .map(|t| {
                let a = length * t;
                Point::from_slice(&[a.cos(), a.sin(), 0.0])
            })
            .collect();
        Trajectory::new(&Sphere2, pts).unwrap()
    }

    #[test]
    fn constant_trajectory_has_zero_tsrvf() {
        let m = Sphere2;
        let p = Point::from_slice(&[0.0, 0.6, 0.8]);
        let alpha = Trajectory::new(&m, vec![p.clone(); 10]).unwrap();
        let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
        assert!(h.values().iter().all(|v| v.norm() == 0.0));
        let back = reconstruct(&m, &p, &h).unwrap();
        assert!(back.points().iter().all(|q| q == &p));
    }

    #[test]
    fn unit_speed_arc_has_unit_tsrvf() {
        let m = Sphere2;
        let alpha = arc(101, 1.0);
        let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
        for v in h.values() {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(l2_norm(&m, &h), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_relation_holds_pointwise() {
        let m = Sphere2;
        let pts = grid(40)
            .into_iter()
            .map(|t| m.project(DVector::from_vec(vec![1.0, 2.0 * t * t, (3.0 * t).sin()])))
            .collect();
        let alpha = Trajectory::new(&m, pts).unwrap();
        let h = compute_tsrvf(&m, &alpha, &Point::from_slice(&[0.0, 0.0, 1.0])).unwrap();
        let vel = velocities(&m, &alpha).unwrap();
        for (v, hv) in vel.iter().zip(h.values()) {
            assert_abs_diff_eq!(hv.norm_squared(), v.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_starts_at_initial_point() {
        let m = Sphere2;
        let err = |n: usize| {
            let alpha = arc(n, 2.0);
            let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
            let beta = reconstruct(&m, alpha.start(), &h).unwrap();
            assert_eq!(beta.start(), alpha.start());
            alpha.points().iter().zip(beta.points()).map(|(a, b)| m.dist(a, b)).fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(50), err(100));
        assert!(coarse < 5e-3, "{coarse} vs {fine}");
        assert!(coarse / fine > 3.5, "{coarse} vs {fine}");
    }

    #[test]
    fn cut_locus_reports_index() {
        let m = Sphere2;
        let pts = vec![
            Point::from_slice(&[1.0, 0.0, 0.0]),
            Point::from_slice(&[0.0, 0.0, -1.0]),
            Point::from_slice(&[0.0, 1.0, 0.0]),
        ];
        let alpha = Trajectory::new(&m, pts).unwrap();
        let err = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap_err();
        assert!(matches!(err, Error::CutLocus { index: Some(1), .. }));
    }

    #[test]
    fn antipodal_neighbours_are_rejected() {
        let m = Sphere2;
        let pts = vec![
            Point::from_slice(&[1.0, 0.0, 0.0]),
            Point::from_slice(&[-1.0, 0.0, 0.0]),
            Point::from_slice(&[0.0, 1.0, 0.0]),
        ];
        assert!(Trajectory::new(&m, pts).is_err());
        assert!(Trajectory::new(&m, vec![Point::from_slice(&[1.0, 0.0, 0.0]); 2]).is_err());
    }

    #[test]
    fn dh_basics() {
        let m = Sphere2;
        let c = m.default_reference();
        let h1 = compute_tsrvf(&m, &arc(30, 1.0), &c).unwrap();
        let h2 = compute_tsrvf(&m, &arc(30, 2.0), &c).unwrap();
        assert_eq!(dh(&m, &h1, &h1).unwrap(), 0.0);
        assert_eq!(dh(&m, &h1, &h2).unwrap(), dh(&m, &h2, &h1).unwrap());
        assert!(dh(&m, &h1, &h2).unwrap() > 0.1);
        let other = compute_tsrvf(&m, &arc(30, 1.0), &Point::from_slice(&[0.0, 1.0, 0.0])).unwrap();
        assert!(matches!(dh(&m, &h1, &other), Err(Error::MismatchedReference)));
    }

    #[test]
    fn identity_warp_is_neutral() {
        let m = Sphere2;
        let alpha = arc(25, 1.5);
        let id = Warp::identity(25);
        let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
        let hw = warp_action(&h, &id).unwrap();
        for (a, b) in h.values().iter().zip(hw.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(warp_trajectory(&m, &alpha, &id).unwrap(), alpha);
    }

    #[test]
    fn warp_action_preserves_norm_with_refinement() {
        let m = Sphere2;
        let err = |n: usize| {
            let pts = grid(n)
                .into_iter()
                .map(|t| m.project(DVector::from_vec(vec![1.0, (2.0 * t).sin(), t * t - 0.3])))
                .collect();
            let alpha = Trajectory::new(&m, pts).unwrap();
            let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
            let gamma = Warp::from_fn(n, |t| t + 0.25 * (PI * t).sin() / PI * 2.0 * t * (1.0 - t)).unwrap();
            (l2_norm(&m, &warp_action(&h, &gamma).unwrap()) - l2_norm(&m, &h)).abs()
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e1 < 1e-2);
        assert!(e2 < e1);
    }

    #[test]
    fn warp_action_is_a_group_action() {
        let m = SpecialEuclidean2::default();
        let n = 200;
        let pts = grid(n)
            .into_iter()
            .map(|t| SpecialEuclidean2::from_pose(1.5 * t, t.cos(), 2.0 * t))
            .collect();
        let alpha = Trajectory::new(&m, pts).unwrap();
        let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
        let g1 = Warp::from_fn(n, |t| t * t).unwrap();
        let g2 = Warp::from_fn(n, |t| (t.exp() - 1.0) / (1f64.exp() - 1.0)).unwrap();
        let lhs = warp_action(&warp_action(&h, &g1).unwrap(), &g2).unwrap();
        let rhs = warp_action(&h, &g1.compose(&g2)).unwrap();
        assert!(dh(&m, &lhs, &rhs).unwrap() < 2e-2 * l2_norm(&m, &h));
    }

    #[test]
    fn warped_trajectory_keeps_endpoints_and_image() {
        let m = Sphere2;
        let alpha = arc(30, 2.5);
        let gamma = Warp::from_fn(30, |t| t.powf(1.7)).unwrap();
        let w = warp_trajectory(&m, &alpha, &gamma).unwrap();
        assert_eq!(w.start(), alpha.start());
        assert_eq!(w.points().last(), alpha.points().last());
        // The input is a great circle, so every output stays on the equator.
        for p in w.points() {
            assert!(p.0[2].abs() < 1e-14);
        }
    }

    #[test]
    fn euclidean_reduction_on_translation_factor() {
        let m = Geometry::se2();
        let n = 50;
        let pts = grid(n)
            .into_iter()
            .map(|t| SpecialEuclidean2::from_pose(0.0, 3.0 * t, 4.0 * t))
            .collect();
        let alpha = Trajectory::new(&m, pts).unwrap();
        let h = compute_tsrvf(&m, &alpha, &m.default_reference()).unwrap();
        // Square-root velocity of a straight line with velocity (3, 4): (3, 4)/sqrt(5).
        for v in h.values() {
            assert_abs_diff_eq!(v[4], 3.0 / 5f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(v[5], 4.0 / 5f64.sqrt(), epsilon = 1e-12);
            assert!(v.rows(0, 4).norm() < 1e-14);
        }
    }
}
