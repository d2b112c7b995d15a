//! Gaussian model of trajectories: independent mean-zero normal shooting
//! vectors at a grid of times, with density and Monte-Carlo p-values.
//!
//! Random streams: draw `i` of a batch seeded with `s` uses a `ChaCha8Rng`
//! seeded from `s` with stream id `i`, so results do not depend on the number
//! of worker threads. A single [`sample`] is draw 0.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Geometry, GeometrySpec, Manifold, Point};
use crate::stats::{coordinates, KarcherSummary};
use crate::tsrvf::Trajectory;

/// Smallest regularization added to every covariance.
pub const MIN_EPSILON: f64 = 1e-6;
/// Regularization relative to the average variance per dimension.
pub const RELATIVE_EPSILON: f64 = 1e-3;
/// Redraws allowed when a draw leaves the injectivity domain.
pub const MAX_REDRAWS: usize = 10;
/// Smallest bootstrap size accepted by [`p_value`].
pub const MIN_BOOTSTRAP: usize = 100;

pub const MODEL_FORMAT: &str = "mwarp-model/1";

/// Normal factor at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub time: f64,
    pub mean: Point,
    /// Orthonormal tangent vectors at `mean`.
    pub basis: Vec<DVector<f64>>,
    /// Regularized covariance in `basis`.
    pub covariance: DMatrix<f64>,
    pub epsilon: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Slice {
    fn new(time: f64, mean: Point, basis: Vec<DVector<f64>>, covariance: DMatrix<f64>, epsilon: f64) -> Self {
        let eig = SymmetricEigen::new(covariance.clone());
        Slice {
            time,
            mean,
            basis,
            covariance,
            epsilon,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Eigenvalues of the regularized covariance.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `log N(c; 0, K)`.
    pub fn log_density(&self, c: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let mut quad = 0.0;
        let mut logdet = 0.0;
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let proj = self.eigenvectors.column(k).dot(c);
            quad += proj * proj / lambda;
            logdet += lambda.ln();
        }
        -0.5 * (d * (2.0 * PI).ln() + logdet + quad)
    }

    /// `-½ log((2π)^d det K)`, the density at the mean.
    pub fn peak_log_density(&self) -> f64 {
        self.log_density(&DVector::zeros(self.dim()))
    }

    fn ambient(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.mean.len());
        for (b, x) in self.basis.iter().zip(c.iter()) {
            v += b * *x;
        }
        v
    }

    fn draw<M: Manifold + ?Sized>(&self, m: &M, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        let d = self.dim();
        for _ in 0..=MAX_REDRAWS {
            let mut c = DVector::zeros(d);
            for k in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                c += self.eigenvectors.column(k) * (z * self.eigenvalues[k].sqrt());
            }
            if m.within_injectivity(&self.mean, &self.ambient(&c)) {
                return Ok(c);
            }
        }
        Err(Error::cut_locus(f64::NAN))
    }
}

/// Per-time Gaussian model around a mean trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub geometry: Geometry,
    /// Sample count of the trajectories the model was fitted on.
    pub source_len: usize,
    /// Grid indices of the model times in the source grid.
    pub indices: Vec<usize>,
    pub slices: Vec<Slice>,
    /// Rank of the tangent subspace at each time.
    pub rank: usize,
    /// Number of trajectories behind the fit.
    pub samples: usize,
}

/// `m` indices spread evenly over `0..len`.
pub fn subsample_indices(len: usize, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| ((j * (len - 1)) as f64 / (m - 1) as f64).round() as usize)
        .collect()
}

fn stream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Fits the model to the aligned set of a summary at `times` grid points.
pub fn fit_model(geometry: &Geometry, summary: &KarcherSummary, times: usize) -> Result<GaussianModel> {
    let n = summary.aligned.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "model needs at least two trajectories, got {n}"
        )));
    }
    summary.mean.ensure_kind(geometry)?;
    let len = summary.mean.len();
    if times < 3 || times > len {
        return Err(Error::InvalidArgument(format!(
            "model grid size must be between 3 and {len}, got {times}"
        )));
    }
    let indices = subsample_indices(len, times);
    let restrict = geometry.tangent_basis(summary.mean.point(0)).is_none();
    let mut rank = 0;
    let slices = indices
        .iter()
        .map(|&j| {
            let sec = &summary.sections[j];
            let (basis, cov) = if restrict {
                let r = (n - 1).min(sec.dim());
                let basis: Vec<_> = (0..r).map(|k| sec.mode_direction(k)).collect();
                let cov = DMatrix::from_diagonal(&sec.singular_values.rows(0, r).into_owned());
                (basis, cov)
            } else {
                (sec.basis.clone(), sec.covariance.clone())
            };
            let d = basis.len();
            rank = d;
            let epsilon = MIN_EPSILON.max(RELATIVE_EPSILON * sec.rho / d as f64);
            let cov = cov + DMatrix::identity(d, d) * epsilon;
            let time = j as f64 / (len - 1) as f64;
            Slice::new(time, summary.mean.point(j).clone(), basis, cov, epsilon)
        })
        .collect();
    Ok(GaussianModel {
        geometry: geometry.clone(),
        source_len: len,
        indices,
        slices,
        rank,
        samples: n,
    })
}

impl GaussianModel {
    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.time).collect()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// The points of α at the model times: α itself when it has one sample
    /// per model time, otherwise α on the source grid subsampled.
    fn points_at<'a>(&self, alpha: &'a Trajectory) -> Result<Vec<&'a Point>> {
        alpha.ensure_kind(&self.geometry)?;
        if alpha.len() == self.slices.len() {
            Ok(alpha.points().iter().collect())
        } else if alpha.len() == self.source_len {
            Ok(self.indices.iter().map(|&j| alpha.point(j)).collect())
        } else {
            Err(Error::ShapeMismatch(format!(
                "trajectory has {} samples, model expects {} or {}",
                alpha.len(),
                self.slices.len(),
                self.source_len
            )))
        }
    }

    /// Shooting-vector coordinates of α at every model time.
    pub fn coordinates(&self, alpha: &Trajectory) -> Result<Vec<DVector<f64>>> {
        let pts = self.points_at(alpha)?;
        self.slices
            .iter()
            .zip(pts)
            .enumerate()
            .map(|(j, (s, p))| {
                let v = self.geometry.log_raw(&s.mean, p).map_err(|e| e.at_index(j))?;
                Ok(coordinates(&self.geometry, &s.basis, &v))
            })
            .collect()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
        self.slices.iter().map(|s| s.draw(&self.geometry, rng)).collect()
    }

    fn density_of(&self, coords: &[DVector<f64>]) -> f64 {
        self.slices.iter().zip(coords).map(|(s, c)| s.log_density(c)).sum()
    }

    fn trajectory_of(&self, coords: &[DVector<f64>]) -> Trajectory {
        let pts = self
            .slices
            .iter()
            .zip(coords)
            .map(|(s, c)| self.geometry.exp_raw(&s.mean, &s.ambient(c)))
            .collect();
        Trajectory::from_parts(self.geometry.kind(), pts)
    }

    /// Sum of the per-time peak log-densities.
    pub fn peak_log_density(&self) -> f64 {
        self.slices.iter().map(Slice::peak_log_density).sum()
    }
}

/// Draws one trajectory at the model times.
pub fn sample(model: &GaussianModel, seed: u64) -> Result<Trajectory> {
    sample_many(model, 1, seed).map(|mut v| v.remove(0))
}

/// Draws `count` trajectories; draw `i` uses stream `i`.
pub fn sample_many(model: &GaussianModel, count: usize, seed: u64) -> Result<Vec<Trajectory>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let c = model.draw(&mut stream(seed, i))?;
            Ok(model.trajectory_of(&c))
        })
        .collect()
}

/// `Σ_j log N(v(t_j); 0, K̂(t_j))`.
pub fn log_density(model: &GaussianModel, alpha: &Trajectory) -> Result<f64> {
    Ok(model.density_of(&model.coordinates(alpha)?))
}

/// Sorted log-densities of `count` model draws, shared by many p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    sorted: Vec<f64>,
}

impl Bootstrap {
    pub fn new(model: &GaussianModel, count: usize, seed: u64) -> Result<Self> {
        if count < MIN_BOOTSTRAP {
            return Err(Error::InvalidArgument(format!(
                "bootstrap size must be at least {MIN_BOOTSTRAP}, got {count}"
            )));
        }
        let mut sorted: Vec<f64> = (0..count as u64)
            .into_par_iter()
            .map(|i| model.draw(&mut stream(seed, i)).map(|c| model.density_of(&c)))
            .collect::<Result<_>>()?;
        sorted.sort_by(f64::total_cmp);
        Ok(Bootstrap { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of draws with log-density strictly below `log_p`.
    pub fn p_value_of(&self, log_p: f64) -> f64 {
        self.sorted.partition_point(|&x| x < log_p) as f64 / self.sorted.len() as f64
    }

    pub fn log_densities(&self) -> &[f64] {
        &self.sorted
    }
}

/// `p(α) = (1/N) Σ_i 1[P(X_i) < P(α)]` over `count` model draws.
pub fn p_value(model: &GaussianModel, alpha: &Trajectory, count: usize, seed: u64) -> Result<f64> {
    let lp = log_density(model, alpha)?;
    Ok(Bootstrap::new(model, count, seed)?.p_value_of(lp))
}

/// p-values of several trajectories against one bootstrap set.
pub fn p_values(model: &GaussianModel, alphas: &[Trajectory], count: usize, seed: u64) -> Result<Vec<f64>> {
    let boot = Bootstrap::new(model, count, seed)?;
    alphas
        .iter()
        .map(|a| log_density(model, a).map(|lp| boot.p_value_of(lp)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SliceDoc {
    t: f64,
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    covariance: Vec<Vec<f64>>,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    manifold: GeometrySpec,
    source_len: usize,
    samples: usize,
    rank: usize,
    indices: Vec<usize>,
    slices: Vec<SliceDoc>,
}

impl GaussianModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: MODEL_FORMAT.into(),
            manifold: GeometrySpec::from(&self.geometry),
            source_len: self.source_len,
            samples: self.samples,
            rank: self.rank,
            indices: self.indices.clone(),
            slices: self
                .slices
                .iter()
                .map(|s| SliceDoc {
                    t: s.time,
                    mean: s.mean.0.as_slice().to_vec(),
                    basis: s.basis.iter().map(|b| b.as_slice().to_vec()).collect(),
                    covariance: s
                        .covariance
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                    epsilon: s.epsilon,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format {:?}",
                doc.format
            )));
        }
        let geometry = Geometry::try_from(doc.manifold)?;
        if doc.slices.len() != doc.indices.len() || doc.slices.len() < 3 {
            return Err(Error::InvalidArgument("model slices and indices disagree".into()));
        }
        let slices = doc
            .slices
            .into_iter()
            .map(|s| {
                let mean = Point::from_slice(&s.mean);
                geometry.check_point(&mean)?;
                let d = s.basis.len();
                if s.covariance.len() != d || s.covariance.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidArgument("covariance shape does not match basis".into()));
                }
                let basis: Vec<DVector<f64>> = s.basis.iter().map(|b| DVector::from_column_slice(b)).collect();
                for b in &basis {
                    geometry.check_tangent(&mean, b)?;
                }
                let cov = DMatrix::from_fn(d, d, |i, j| s.covariance[i][j]);
                let slice = Slice::new(s.t, mean, basis, cov, s.epsilon);
                if slice.eigenvalues.iter().any(|&l| l <= 0.0) {
                    return Err(Error::InvalidArgument("covariance is not positive definite".into()));
                }
                Ok(slice)
            })
            .collect::<Result<_>>()?;
        Ok(GaussianModel {
            geometry,
            source_len: doc.source_len,
            indices: doc.indices,
            slices,
            rank: doc.rank,
            samples: doc.samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
