//! Pairwise distance matrices, leave-one-out k-NN, average-linkage
//! clustering and classical MDS.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point};
use crate::registration::ds_tsrvf;
use crate::stats::dx;
use crate::tsrvf::{compute_tsrvf, dh, Trajectory, Tsrvf};

/// Which trajectory distance fills a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// L² distance between TSRVFs, no registration.
    Dh,
    /// Warping-invariant distance.
    Ds,
    /// Time-integrated pointwise geodesic distance.
    Dx,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Dh => "dh",
            Metric::Ds => "ds",
            Metric::Dx => "dx",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dh" => Ok(Metric::Dh),
            "ds" => Ok(Metric::Ds),
            "dx" => Ok(Metric::Dx),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// Symmetric matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub metric: Metric,
    pub ids: Vec<String>,
    values: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Validates shape, symmetry (1e-10), zero diagonal and nonnegativity.
    pub fn new(metric: Metric, ids: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = ids.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for a {}x{} matrix",
                n,
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if v.is_nan() || v < 0.0 || (v - values[(j, i)]).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { metric, ids, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// All pairwise distances; the upper triangle is computed in parallel and mirrored.
pub fn distance_matrix<M: Manifold + ?Sized>(
    m: &M,
    trajs: &[Trajectory],
    ids: Vec<String>,
    metric: Metric,
    c: &Point,
) -> Result<DistanceMatrix> {
    let n = trajs.len();
    if ids.len() != n {
        return Err(Error::ShapeMismatch(format!("{} ids for {} trajectories", ids.len(), n)));
    }
    if let Some(first) = trajs.first() {
        for a in trajs {
            a.ensure_kind(m)?;
            if a.len() != first.len() {
                return Err(Error::ShapeMismatch("trajectories differ in length".into()));
            }
        }
    }
    let h: Vec<Tsrvf> = match metric {
        Metric::Dx => Vec::new(),
        _ => trajs
            .par_iter()
            .map(|a| compute_tsrvf(m, a, c))
            .collect::<Result<_>>()?,
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| match metric {
            Metric::Dh => dh(m, &h[i], &h[j]),
            Metric::Ds => ds_tsrvf(m, &h[i], &h[j]),
            Metric::Dx => dx(m, &trajs[i], &trajs[j]),
        })
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[(i, j)] = d;
        values[(j, i)] = d;
    }
    DistanceMatrix::new(metric, ids, values)
}

/// Leave-one-out k-NN result.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predictions: Vec<String>,
    /// Fraction of correct predictions.
    pub rate: f64,
}

/// Majority vote among the `k` nearest other items. Vote ties go to the
/// label of the single nearest neighbor; distance ties to the lower index.
pub fn knn_classify(dm: &DistanceMatrix, labels: &[String], k: usize) -> Result<Classification> {
    let n = dm.len();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {} items", labels.len(), n)));
    }
    if n < 2 || k == 0 || k > n - 1 {
        return Err(Error::InvalidArgument(format!("k = {k} is not in 1..={}", n.saturating_sub(1))));
    }
    let predictions: Vec<String> = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dm.get(i, a).total_cmp(&dm.get(i, b)).then(a.cmp(&b)));
            let nearest = &others[..k];
            let mut votes: HashMap<&str, usize> = HashMap::new();
            for &j in nearest {
                *votes.entry(labels[j].as_str()).or_default() += 1;
            }
            let top = votes.values().copied().max().unwrap_or(0);
            let leaders: Vec<&str> = votes.iter().filter(|(_, &c)| c == top).map(|(l, _)| *l).collect();
            if leaders.len() == 1 {
                leaders[0].to_string()
            } else {
                labels[nearest[0]].clone()
            }
        })
        .collect();
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(Classification {
        rate: correct as f64 / n as f64,
        predictions,
    })
}

/// One agglomeration step. Leaves are `0..n`; merge `k` creates cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub ids: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomerative clustering. Equal heights merge the pair
/// with the smallest cluster ids first.
pub fn hierarchical_cluster(dm: &DistanceMatrix) -> Dendrogram {
    let n = dm.len();
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let link = |a: &[usize], b: &[usize]| {
        let s: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| dm.get(i, j))).sum();
        s / (a.len() * b.len()) as f64
    };
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = link(&active[x].1, &active[y].1);
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
        let (height, x, y) = best;
        let (id_y, members_y) = active.remove(y);
        let (id_x, members_x) = active.remove(x);
        let (left, right) = (id_x.min(id_y), id_x.max(id_y));
        let mut members = members_x;
        members.extend(members_y);
        members.sort_unstable();
        merges.push(Merge {
            left,
            right,
            height,
            size: members.len(),
        });
        active.push((n + merges.len() - 1, members));
        active.sort_by_key(|(id, _)| *id);
    }
    Dendrogram {
        ids: dm.ids.clone(),
        merges,
    }
}

impl Dendrogram {
    /// Flat assignment into `k` clusters by undoing the last `k - 1` merges.
    /// Cluster labels are numbered by first appearance in leaf order.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.ids.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cannot cut {n} leaves into {k} clusters")));
        }
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        for (step, mg) in self.merges.iter().take(n - k).enumerate() {
            parent[mg.left] = n + step;
            parent[mg.right] = n + step;
        }
        let root = |mut i: usize| {
            while parent[i] != i {
                i = parent[i];
            }
            i
        };
        let mut names: HashMap<usize, usize> = HashMap::new();
        Ok((0..n)
            .map(|i| {
                let r = root(i);
                let next = names.len();
                *names.entry(r).or_insert(next)
            })
            .collect())
    }
}

/// Classical (Torgerson) MDS. Each output axis is oriented so that its
/// largest-magnitude coordinate is positive.
pub fn mds(dm: &DistanceMatrix, dim: usize) -> Result<DMatrix<f64>> {
    let n = dm.len();
    if dim == 0 || dim > n {
        return Err(Error::InvalidArgument(format!("MDS dimension {dim} for {n} points")));
    }
    let d2 = dm.values().map(|x| x * x);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).mean()).collect();
    let total = d2.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + total));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = DMatrix::zeros(n, dim);
    for (axis, &k) in order.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        let mut col = eig.eigenvectors.column(k) * scale;
        let big = col.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            col = -col;
        }
        out.set_column(axis, &col);
    }
    Ok(out)
}
