//! Pre-shape sphere of planar closed curves.
//!
//! A closed curve β is represented by its q-function `q = β̇ / sqrt(|β̇|)`
//! sampled at `n` uniformly spaced parameter values `s_i = i/n`. Rescaling the
//! curve to unit length puts `q` on the unit sphere of the discrete L² product
//! `<q1, q2> = Σ_i q1(s_i)·q2(s_i) / n`. The closure condition and
//! reparameterization are not factored out; rotation can be removed pairwise
//! with [`rotation_align`].
//!
//! Ambient layout: `[qx_0, qy_0, qx_1, qy_1, ...]`.

use std::f64::consts::TAU;

use nalgebra::{DVector, Matrix2, Vector2};

use super::hypersphere::Hypersphere;
use super::se2::rotation_matrix;
use super::{Manifold, ManifoldKind, Point, ZERO_SPEED};
use crate::error::{Error, Result};

pub const DEFAULT_CONTOUR_SAMPLES: usize = 100;
pub(crate) const MIN_CONTOUR_SAMPLES: usize = 8;

/// Derivative magnitudes below this make a curve degenerate.
const MIN_SPEED: f64 = 1e-10;

/// A closed planar polygon; the last sample connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    samples: Vec<[f64; 2]>,
}

impl PlanarCurve {
    /// Builds a curve, dropping consecutive duplicate samples (including a
    /// repeated first sample at the end).
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateCurve("non-finite coordinate".into()));
        }
        let mut clean: Vec<[f64; 2]> = Vec::with_capacity(samples.len());
        for s in samples {
            if clean.last() != Some(&s) {
                clean.push(s);
            }
        }
        while clean.len() > 1 && clean.first() == clean.last() {
            clean.pop();
        }
        if clean.len() < MIN_CONTOUR_SAMPLES {
            return Err(Error::DegenerateCurve(format!(
                "{} distinct samples, need at least {MIN_CONTOUR_SAMPLES}",
                clean.len()
            )));
        }
        Ok(PlanarCurve { samples: clean })
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Perimeter, including the closing segment.
    pub fn length(&self) -> f64 {
        let n = self.samples.len();
        (0..n)
            .map(|i| seg_len(self.samples[i], self.samples[(i + 1) % n]))
            .sum()
    }

    /// `n` points equally spaced in arc length, starting at the first sample.
    pub fn resample(&self, n: usize) -> Vec<[f64; 2]> {
        let m = self.samples.len();
        let total = self.length();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        let mut seg_start = 0.0;
        for k in 0..n {
            let target = total * k as f64 / n as f64;
            loop {
                let len = seg_len(self.samples[seg % m], self.samples[(seg + 1) % m]);
                if seg_start + len >= target || seg + 1 >= m {
                    let a = self.samples[seg % m];
                    let b = self.samples[(seg + 1) % m];
                    let f = if len > 0.0 {
                        ((target - seg_start) / len).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
                    break;
                }
                seg_start += len;
                seg += 1;
            }
        }
        out
    }
}

fn seg_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreShapeSphere {
    samples: usize,
}

impl PreShapeSphere {
    pub fn new(samples: usize) -> Self {
        assert!(samples >= MIN_CONTOUR_SAMPLES, "q-sphere needs at least {MIN_CONTOUR_SAMPLES} samples");
        PreShapeSphere { samples }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn sphere(&self) -> Hypersphere {
        Hypersphere {
            weight: 1.0 / self.samples as f64,
        }
    }

    /// q-function of `curve` on this sphere's grid: arc-length resampling,
    /// unit-length rescaling, central differences on the circular index, then
    /// normalization to unit discrete L² norm.
    pub fn q_function(&self, curve: &PlanarCurve) -> Result<Point> {
        let n = self.samples;
        let length = curve.length();
        if length < MIN_SPEED {
            return Err(Error::DegenerateCurve("zero length".into()));
        }
        let pts: Vec<[f64; 2]> = curve
            .resample(n)
            .into_iter()
            .map(|p| [p[0] / length, p[1] / length])
            .collect();
        let half_step = 2.0 / n as f64;
        let mut q = DVector::zeros(2 * n);
        for i in 0..n {
            let next = pts[(i + 1) % n];
            let prev = pts[(i + n - 1) % n];
            let d = Vector2::new((next[0] - prev[0]) / half_step, (next[1] - prev[1]) / half_step);
            let speed = d.norm();
            if speed < MIN_SPEED {
                return Err(Error::DegenerateCurve(format!(
                    "vanishing derivative at sample {i}"
                )));
            }
            let qi = d / speed.sqrt();
            q[2 * i] = qi[0];
            q[2 * i + 1] = qi[1];
        }
        Ok(Point(self.sphere().normalize(q)))
    }

    /// Applies `r` to every sample of a q-array (or tangent vector).
    pub fn rotate(r: &Matrix2<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for c in 0..v.len() / 2 {
            let x = r * Vector2::new(v[2 * c], v[2 * c + 1]);
            out[2 * c] = x[0];
            out[2 * c + 1] = x[1];
        }
        out
    }
}

/// Rotation `R ∈ SO(2)` minimizing `|q1 - R q2|` and the rotated `q2`.
///
/// For 2×2 problems the determinant-constrained SVD (Procrustes) solution has
/// the closed form `φ = atan2(N01 - N10, N00 + N11)` with `N = Σ q2_i q1_iᵀ`.
pub fn rotation_align(q1: &Point, q2: &Point) -> (Matrix2<f64>, Point) {
    let mut n = Matrix2::zeros();
    for c in 0..q1.len() / 2 {
        let a = Vector2::new(q1.0[2 * c], q1.0[2 * c + 1]);
        let b = Vector2::new(q2.0[2 * c], q2.0[2 * c + 1]);
        n += b * a.transpose();
    }
    let phi = (n[(0, 1)] - n[(1, 0)]).atan2(n[(0, 0)] + n[(1, 1)]);
    let r = rotation_matrix(phi);
    let aligned = Point(PreShapeSphere::rotate(&r, &q2.0));
    (r, aligned)
}

impl Manifold for PreShapeSphere {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::QSphere
    }

    fn ambient_dim(&self) -> usize {
        2 * self.samples
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.len() != 2 * self.samples {
            return Err(Error::InvalidPoint(format!(
                "q-array has {} values, expected {}",
                p.len(),
                2 * self.samples
            )));
        }
        self.sphere().check_point(&p.0, 1e-8)
    }

    fn check_tangent(&self, p: &Point, v: &DVector<f64>) -> Result<()> {
        self.sphere().check_tangent(&p.0, v, 1e-8)
    }

    fn project(&self, coords: DVector<f64>) -> Point {
        let n = self.sphere().norm(&coords);
        if n > ZERO_SPEED && n.is_finite() {
            Point(coords / n)
        } else {
            self.default_reference()
        }
    }

    fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> DVector<f64> {
        self.sphere().project_tangent(&p.0, v)
    }

    fn exp_raw(&self, p: &Point, v: &DVector<f64>) -> Point {
        self.sphere().exp(p, v)
    }

    fn log_raw(&self, p: &Point, q: &Point) -> Result<DVector<f64>> {
        self.sphere().log(p, q)
    }

    fn dist(&self, p: &Point, q: &Point) -> f64 {
        self.sphere().dist(&p.0, &q.0)
    }

    fn transport_raw(&self, v: &DVector<f64>, p: &Point, q: &Point) -> Result<DVector<f64>> {
        self.sphere().transport(v, p, q)
    }

    fn metric_sqrt_weights(&self) -> DVector<f64> {
        DVector::from_element(2 * self.samples, (1.0 / self.samples as f64).sqrt())
    }

    fn inner_raw(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.sphere().inner(v, w)
    }

    fn tangent_basis(&self, _p: &Point) -> Option<Vec<DVector<f64>>> {
        None
    }

    /// q-function of the unit circle, `q(s) = (-sin 2πs, cos 2πs)`.
    fn default_reference(&self) -> Point {
        let n = self.samples;
        let mut q = DVector::zeros(2 * n);
        for i in 0..n {
            let s = TAU * i as f64 / n as f64;
            q[2 * i] = -s.sin();
            q[2 * i + 1] = s.cos();
        }
        Point(q)
    }

    fn within_injectivity(&self, _p: &Point, v: &DVector<f64>) -> bool {
        self.sphere().within_injectivity(v)
    }
}
