//! Karcher means of points and of trajectory sets, cross-sectional
//! covariance of shooting vectors, and tangent PCA.

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{complete_tangent_basis, Manifold, Point};
use crate::registration::align_pair;
use crate::tsrvf::{compute_tsrvf, dh, reconstruct, trapezoid_weights, warp_action, Trajectory, Tsrvf};
use crate::warp::Warp;

/// Step size of the point-mean gradient iteration.
pub const POINT_MEAN_STEP: f64 = 0.5;
/// Gradient norm at which the point-mean iteration stops.
pub const POINT_MEAN_TOL: f64 = 1e-8;
pub const POINT_MEAN_MAX_ITER: usize = 100;

/// Karcher mean of points by `p <- exp(p, (ε/n) Σ log(p, p_i))`.
pub fn karcher_mean_points<M: Manifold + ?Sized>(m: &M, points: &[Point]) -> Result<Point> {
    let first = points
        .first()
        .ok_or_else(|| Error::InsufficientData("Karcher mean of zero points".into()))?;
    if points.iter().all(|p| p == first) {
        return Ok(first.clone());
    }
    let mut p = extrinsic_start(m, points).unwrap_or_else(|| first.clone());
    let scale = 1.0 / points.len() as f64;
    let mut residual = f64::INFINITY;
    for _ in 0..POINT_MEAN_MAX_ITER {
        let mut grad = DVector::zeros(p.len());
        for (i, q) in points.iter().enumerate() {
            grad += m.log_raw(&p, q).map_err(|e| e.at_index(i))?;
        }
        grad *= scale;
        residual = m.norm_raw(&grad);
        if residual <= POINT_MEAN_TOL {
            return Ok(p);
        }
        p = m.exp_raw(&p, &(grad * POINT_MEAN_STEP));
    }
    Err(Error::NoConvergence {
        iterations: POINT_MEAN_MAX_ITER,
        residual,
    })
}

/// Projection of the ambient average, when it lands on the manifold.
fn extrinsic_start<M: Manifold + ?Sized>(m: &M, points: &[Point]) -> Option<Point> {
    let mut sum = DVector::zeros(points[0].len());
    for p in points {
        sum += &p.0;
    }
    if sum.norm() < 1e-6 * points.len() as f64 {
        return None;
    }
    let p = m.project(sum / points.len() as f64);
    m.check_point(&p).ok().map(|_| p)
}

/// Per-time second-order statistics of shooting vectors `v_i = log(μ(t), α̃_i(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    /// Orthonormal tangent vectors at μ(t) (ambient coordinates).
    pub basis: Vec<DVector<f64>>,
    /// `K̂(t)` in `basis`.
    pub covariance: DMatrix<f64>,
    /// `ρ̂(t) = trace K̂(t)`.
    pub rho: f64,
    /// Columns are the singular vectors of `K̂(t)`, in `basis` coordinates.
    pub modes: DMatrix<f64>,
    /// Singular values of `K̂(t)`, nonincreasing.
    pub singular_values: DVector<f64>,
}

impl CrossSection {
    /// Dimension of the coordinate space.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Ambient vector of coordinates `c` in `basis`.
    pub fn to_ambient(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.basis[0].len());
        for (b, x) in self.basis.iter().zip(c.iter()) {
            v += b * *x;
        }
        v
    }

    /// Ambient direction of PCA mode `k`.
    pub fn mode_direction(&self, k: usize) -> DVector<f64> {
        self.to_ambient(&self.modes.column(k).into_owned())
    }
}

/// Coordinates of `v` in an orthonormal basis under the metric of `m`.
pub fn coordinates<M: Manifold + ?Sized>(m: &M, basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|b| m.inner_raw(b, v)))
}

/// Orthonormal basis of the span of `vectors` (principal directions first),
/// completed to `target` vectors tangent at `p`.
fn principal_basis<M: Manifold + ?Sized>(m: &M, p: &Point, vectors: &[DVector<f64>], target: usize) -> Vec<DVector<f64>> {
    let w = m.metric_sqrt_weights();
    let dim = w.len();
    let cols: Vec<DVector<f64>> = vectors.iter().map(|v| v.component_mul(&w)).collect();
    let mat = DMatrix::from_columns(&cols);
    let svd = mat.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in order {
        if basis.len() == target || svd.singular_values[k] <= 1e-10 * top.max(1e-300) {
            break;
        }
        let mut b = DVector::from_iterator(dim, u.column(k).iter().zip(w.iter()).map(|(x, s)| x / s));
        b = m.project_tangent(p, &b);
        for e in &basis {
            let c = m.inner_raw(&b, e);
            b -= e * c;
        }
        let norm = m.norm_raw(&b);
        if norm > 1e-8 {
            basis.push(b / norm);
        }
    }
    complete_tangent_basis(m, p, basis, target)
}

/// Tangent basis at `p`: the geometry's canonical one when it has one,
/// otherwise principal directions of the shooting vectors.
fn frame<M: Manifold + ?Sized>(m: &M, p: &Point, shooting: &[DVector<f64>]) -> Vec<DVector<f64>> {
    match m.tangent_basis(p) {
        Some(b) => b,
        None => {
            let tangent_dim = m.ambient_dim() - 1;
            principal_basis(m, p, shooting, shooting.len().min(tangent_dim))
        }
    }
}

/// Second-order statistics of coordinate vectors: `K̂ = Σ c cᵀ / (n - 1)`.
pub fn section_from_coordinates(basis: Vec<DVector<f64>>, coords: &[DVector<f64>]) -> CrossSection {
    let d = basis.len();
    let n = coords.len();
    let mut k = DMatrix::zeros(d, d);
    for c in coords {
        k += c * c.transpose();
    }
    if n > 1 {
        k /= (n - 1) as f64;
    }
    let k = (&k + k.transpose()) * 0.5;
    let rho = k.trace().max(0.0);
    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let singular_values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let mut modes = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let mut u = eig.eigenvectors.column(i).into_owned();
        // Sign convention: largest-magnitude entry positive.
        let big = u.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            u = -u;
        }
        modes.set_column(col, &u);
    }
    CrossSection {
        basis,
        covariance: k,
        rho,
        modes,
        singular_values,
    }
}

/// Shooting vectors from `mean(t_j)` to each trajectory at time `t_j`.
pub fn shooting_vectors<M: Manifold + ?Sized>(
    m: &M,
    mean: &Trajectory,
    samples: &[Trajectory],
    j: usize,
) -> Result<Vec<DVector<f64>>> {
    samples
        .iter()
        .map(|a| m.log_raw(mean.point(j), a.point(j)).map_err(|e| e.at_index(j)))
        .collect()
}

/// `K̂(t)`, `ρ̂(t)` and PCA of the shooting vectors at every sample time.
pub fn cross_sectional_stats<M: Manifold + ?Sized>(
    m: &M,
    mean: &Trajectory,
    aligned: &[Trajectory],
) -> Result<Vec<CrossSection>> {
    if aligned.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    mean.ensure_kind(m)?;
    for a in aligned {
        a.ensure_kind(m)?;
        if a.len() != mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} samples, mean has {}",
                a.len(),
                mean.len()
            )));
        }
    }
    (0..mean.len())
        .into_par_iter()
        .map(|j| {
            let v = shooting_vectors(m, mean, aligned, j)?;
            let basis = frame(m, mean.point(j), &v);
            let coords: Vec<_> = v.iter().map(|x| coordinates(m, &basis, x)).collect();
            Ok(section_from_coordinates(basis, &coords))
        })
        .collect()
}

/// Trapezoid integral over `[0, 1]` of uniformly sampled values.
pub fn integrate(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    trapezoid_weights(values.len())
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// `d_x(α1, α2) = ∫ d_m(α1(t), α2(t)) dt`, trapezoid rule.
pub fn dx<M: Manifold + ?Sized>(m: &M, a1: &Trajectory, a2: &Trajectory) -> Result<f64> {
    a1.ensure_kind(m)?;
    a2.ensure_kind(m)?;
    if a1.len() != a2.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory lengths {} and {}",
            a1.len(),
            a2.len()
        )));
    }
    let d: Vec<f64> = a1
        .points()
        .iter()
        .zip(a2.points())
        .map(|(p, q)| m.dist(p, q))
        .collect();
    Ok(integrate(&d))
}

/// Stopping rule of the trajectory Karcher mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarcherOptions {
    /// Relative energy decrease below which the iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        KarcherOptions {
            tolerance: 1e-4,
            max_iterations: 50,
        }
    }
}

/// Output of the trajectory Karcher mean (or of the unaligned baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct KarcherSummary {
    pub reference: Point,
    /// Mean trajectory μ.
    pub mean: Trajectory,
    /// `α̃_i = α_i ∘ γ_i*`.
    pub aligned: Vec<Trajectory>,
    pub warps: Vec<Warp>,
    /// Average of the aligned TSRVFs (absent for the unaligned baseline).
    pub mean_tsrvf: Option<Tsrvf>,
    pub sections: Vec<CrossSection>,
    /// `E = Σ dh(h̄, (h_i, γ_i))²` after each alignment pass.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    /// Index of the medoid used to initialize.
    pub initial: Option<usize>,
}

impl KarcherSummary {
    pub fn rho(&self) -> Vec<f64> {
        self.sections.iter().map(|s| s.rho).collect()
    }

    pub fn integrated_rho(&self) -> f64 {
        integrate(&self.rho())
    }

    pub fn len(&self) -> usize {
        self.aligned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aligned.is_empty()
    }
}

fn check_collection<M: Manifold + ?Sized>(m: &M, trajs: &[Trajectory]) -> Result<usize> {
    if trajs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two trajectories, got {}",
            trajs.len()
        )));
    }
    let t = trajs[0].len();
    for a in trajs {
        a.ensure_kind(m)?;
        if a.len() != t {
            return Err(Error::ShapeMismatch(format!(
                "trajectories have {} and {} samples",
                t,
                a.len()
            )));
        }
    }
    Ok(t)
}

/// Index minimizing the summed distance to all others.
pub fn medoid(d: &DMatrix<f64>) -> usize {
    (0..d.nrows())
        .map(|i| (i, d.row(i).sum()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Karcher mean of trajectories under `d_s`.
///
/// Starts from the medoid under unaligned `dh`, then alternates DP alignment of
/// every TSRVF to the current average and re-averaging. A trajectory keeps its
/// previous warp when the new one does not bring it closer to the average, so
/// the energy never increases. μ is the integral curve of the final average
/// TSRVF started at the Karcher mean of the start points, or the common
/// trajectory when the aligned set is all one trajectory.
pub fn karcher_mean_trajectories<M: Manifold + ?Sized>(
    m: &M,
    trajs: &[Trajectory],
    c: &Point,
    options: KarcherOptions,
) -> Result<KarcherSummary> {
    let t = check_collection(m, trajs)?;
    let n = trajs.len();
    let h: Vec<Tsrvf> = trajs
        .par_iter()
        .enumerate()
        .map(|(i, a)| compute_tsrvf(m, a, c).map_err(|e| tag(e, i)))
        .collect::<Result<_>>()?;

    let mut d0 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = dh(m, &h[i], &h[j])?;
            d0[(i, j)] = d;
            d0[(j, i)] = d;
        }
    }
    let init = medoid(&d0);
    let starts: Vec<Point> = trajs.iter().map(|a| a.start().clone()).collect();
    let start_mean = karcher_mean_points(m, &starts)?;

    let mut center = h[init].clone();
    let mut warps: Vec<Warp> = vec![Warp::identity(t); n];
    let mut warped: Vec<Tsrvf> = h.clone();
    let mut residuals = vec![0.0; n];
    let mut energy_trace = Vec::new();
    let mut converged = false;

    for iter in 0..options.max_iterations {
        let updates: Vec<(Warp, Tsrvf, f64)> = h
            .par_iter()
            .map(|hi| {
                let al = align_pair(m, &center, hi)?;
                let moved = warp_action(hi, &al.warp)?;
                Ok((al.warp, moved, al.distance))
            })
            .collect::<Result<_>>()?;
        for (i, (w, moved, d)) in updates.into_iter().enumerate() {
            let keep = dh(m, &center, &warped[i])?;
            if d <= keep {
                warps[i] = w;
                warped[i] = moved;
                residuals[i] = d;
            } else {
                residuals[i] = keep;
            }
        }
        let energy: f64 = residuals.iter().map(|d| d * d).sum();
        debug!("karcher iteration {iter}: energy {energy:.6e}");
        let previous = energy_trace.last().copied();
        energy_trace.push(energy);
        if energy <= f64::EPSILON {
            converged = true;
            break;
        }
        if let Some(prev) = previous {
            if (prev - energy) <= options.tolerance * prev {
                converged = true;
                break;
            }
        }
        center = Tsrvf::mean(&warped)?;
    }

    let mean_tsrvf = Tsrvf::mean(&warped)?;
    let aligned: Vec<Trajectory> = trajs
        .par_iter()
        .zip(&warps)
        .map(|(a, w)| crate::tsrvf::warp_trajectory(m, a, w))
        .collect::<Result<_>>()?;
    let mean = if aligned.iter().all(|a| a == &aligned[0]) {
        aligned[0].clone()
    } else {
        reconstruct(m, &start_mean, &mean_tsrvf)?
    };
    let sections = cross_sectional_stats(m, &mean, &aligned)?;
    Ok(KarcherSummary {
        reference: c.clone(),
        mean,
        aligned,
        warps,
        mean_tsrvf: Some(mean_tsrvf),
        sections,
        energy_trace,
        converged,
        initial: Some(init),
    })
}

fn tag(e: Error, i: usize) -> Error {
    match e {
        Error::CutLocus { distance, margin, .. } => Error::CutLocus {
            distance,
            margin,
            index: Some(i),
        },
        other => other,
    }
}

/// Unaligned baseline: pointwise Karcher mean and shooting-vector statistics
/// of the raw trajectories.
pub fn cross_sectional_summary<M: Manifold + ?Sized>(m: &M, trajs: &[Trajectory], c: &Point) -> Result<KarcherSummary> {
    let t = check_collection(m, trajs)?;
    let points: Vec<Point> = (0..t)
        .into_par_iter()
        .map(|j| {
            let at: Vec<Point> = trajs.iter().map(|a| a.point(j).clone()).collect();
            karcher_mean_points(m, &at)
        })
        .collect::<Result<_>>()?;
    let mean = Trajectory::from_parts(m.kind(), points);
    let sections = cross_sectional_stats(m, &mean, trajs)?;
    Ok(KarcherSummary {
        reference: c.clone(),
        mean,
        aligned: trajs.to_vec(),
        warps: vec![Warp::identity(t); trajs.len()],
        mean_tsrvf: None,
        sections,
        energy_trace: Vec::new(),
        converged: true,
        initial: None,
    })
}
