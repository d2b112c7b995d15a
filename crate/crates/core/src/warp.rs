//! Discretized time warps: boundary-fixed nondecreasing maps of [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_i = i / (len - 1)`.
pub fn grid(len: usize) -> Vec<f64> {
    let step = 1.0 / (len - 1) as f64;
    (0..len).map(|i| i as f64 * step).collect()
}

/// Slack allowed on the boundary and monotonicity checks before values are snapped.
const WARP_TOL: f64 = 1e-9;

/// Values `γ(t_i)` on the uniform grid; piecewise linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Warp {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Warp {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Warp::new(values)
    }
}

impl From<Warp> for Vec<f64> {
    fn from(w: Warp) -> Self {
        w.values
    }
}

impl Warp {
    /// Validates `γ(0) = 0`, `γ(1) = 1` and monotonicity (flat runs allowed).
    /// Values within `1e-9` of the constraints are snapped onto them.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidWarp("needs at least two samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWarp("non-finite value".into()));
        }
        if values[0].abs() > WARP_TOL || (values[n - 1] - 1.0).abs() > WARP_TOL {
            return Err(Error::InvalidWarp(format!(
                "boundary values ({}, {}) are not (0, 1)",
                values[0],
                values[n - 1]
            )));
        }
        values[0] = 0.0;
        values[n - 1] = 1.0;
        for i in 1..n {
            if values[i] < values[i - 1] - WARP_TOL {
                return Err(Error::InvalidWarp(format!("decreasing at sample {i}")));
            }
            values[i] = values[i].max(values[i - 1]).min(1.0);
        }
        Ok(Warp { values })
    }

    pub fn identity(len: usize) -> Self {
        Warp { values: grid(len) }
    }

    /// Samples `f` on the grid and validates the result.
    pub fn from_fn(len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Warp::new(grid(len).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    /// Piecewise-linear evaluation at `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let (k, f) = locate(t, self.values.len());
        self.values[k] + f * (self.values[k + 1] - self.values[k])
    }

    /// Finite-difference derivative on the grid: central inside, one-sided at the ends.
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.values.len();
        let h = self.step();
        (0..n)
            .map(|i| {
                let d = if i == 0 {
                    (self.values[1] - self.values[0]) / h
                } else if i == n - 1 {
                    (self.values[n - 1] - self.values[n - 2]) / h
                } else {
                    (self.values[i + 1] - self.values[i - 1]) / (2.0 * h)
                };
                d.max(0.0)
            })
            .collect()
    }

    /// `self ∘ inner`, sampled on `inner`'s grid.
    pub fn compose(&self, inner: &Warp) -> Warp {
        let values = inner.values.iter().map(|&s| self.eval(s)).collect();
        Warp::new(values).expect("composition of warps is a warp")
    }

    /// Numerical inverse on the same grid. Flat runs invert to their left end.
    pub fn inverse(&self) -> Warp {
        let n = self.values.len();
        let h = self.step();
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        for (i, &t) in grid(n).iter().enumerate() {
            if i == n - 1 {
                out.push(1.0);
                break;
            }
            while k + 1 < n - 1 && self.values[k + 1] < t {
                k += 1;
            }
            let (a, b) = (self.values[k], self.values[k + 1]);
            let f = if b > a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
            out.push((k as f64 + f) * h);
        }
        Warp::new(out).expect("inverse of a warp is a warp")
    }

    /// Sup-norm distance between two warps on the same grid.
    pub fn sup_distance(&self, other: &Warp) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Cell index and fractional offset of `t` on a uniform grid of `len` samples.
pub(crate) fn locate(t: f64, len: usize) -> (usize, f64) {
    let h = 1.0 / (len - 1) as f64;
    let x = (t.clamp(0.0, 1.0) / h).max(0.0);
    let k = (x.floor() as usize).min(len - 2);
    (k, (x - k as f64).clamp(0.0, 1.0))
}
