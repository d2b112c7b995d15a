//! Pairwise temporal registration by dynamic programming over the T × T grid.

use num_integer::gcd;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point};
use crate::tsrvf::{compute_tsrvf, dh, warp_action, Trajectory, Tsrvf};
use crate::warp::{grid, Warp};

/// Largest run or rise of a single DP step.
pub const MAX_STEP: usize = 4;

/// Step shapes `(a, b)` with `1 <= a, b <= 4` and `gcd(a, b) = 1`, ordered by
/// closeness of the slope `b / a` to one. Ties in cost keep the earliest entry.
pub fn stencil() -> Vec<(usize, usize)> {
    let mut steps: Vec<(usize, usize)> = (1..=MAX_STEP)
        .flat_map(|a| (1..=MAX_STEP).map(move |b| (a, b)))
        .filter(|&(a, b)| gcd(a, b) == 1)
        .collect();
    steps.sort_by(|&(a1, b1), &(a2, b2)| {
        let s1 = (b1 as f64 / a1 as f64).ln().abs();
        let s2 = (b2 as f64 / a2 as f64).ln().abs();
        s1.total_cmp(&s2).then(a1.cmp(&a2))
    });
    steps
}

const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// TSRVF samples scaled by the metric's square-root weights, so that the
/// metric becomes the Euclidean dot product.
struct Flat {
    dim: usize,
    len: usize,
    data: Vec<f64>,
}

impl Flat {
    fn new<M: Manifold + ?Sized>(m: &M, h: &Tsrvf) -> Self {
        let w = m.metric_sqrt_weights();
        let dim = w.len();
        let mut data = Vec::with_capacity(dim * h.len());
        for v in h.values() {
            data.extend(v.iter().zip(w.iter()).map(|(x, s)| x * s));
        }
        Flat {
            dim,
            len: h.len(),
            data,
        }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Linear interpolation at fractional grid position `x` into `out`.
    fn interp(&self, x: f64, out: &mut [f64]) {
        let k = (x.floor().max(0.0) as usize).min(self.len - 2);
        let f = x - k as f64;
        let (a, b) = (self.row(k), self.row(k + 1));
        for ((o, p), q) in out.iter_mut().zip(a).zip(b) {
            *o = p + f * (q - p);
        }
    }
}

/// `∫ |h1(t) - sqrt(s) h2(γ(t))|² dt` over the segment from grid node
/// `(k, l)` to `(i, j)`, with γ linear on it and slope `s = (j - l) / (i - k)`.
fn segment_cost(h1: &Flat, h2: &Flat, k: usize, l: usize, i: usize, j: usize, buf: &mut [Vec<f64>; 2]) -> f64 {
    let step = 1.0 / (h1.len - 1) as f64;
    let a = (i - k) as f64;
    let slope = (j - l) as f64 / a;
    let root = slope.sqrt();
    let half = 0.5 * a;
    let mut total = 0.0;
    for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
        let x = k as f64 + half * (1.0 + node);
        let y = l as f64 + slope * (x - k as f64);
        let [u, v] = buf;
        h1.interp(x, u);
        h2.interp(y, v);
        let sq: f64 = u.iter().zip(v.iter()).map(|(p, q)| (p - root * q).powi(2)).sum();
        total += weight * sq;
    }
    total * half * step
}

/// Same integral over the single cell `[k, k + 1]` with γ running linearly
/// from fractional position `y0` to `y1`.
fn cell_cost(h1: &Flat, h2: &Flat, k: usize, y0: f64, y1: f64, buf: &mut [Vec<f64>; 2]) -> f64 {
    let step = 1.0 / (h1.len - 1) as f64;
    let slope = (y1 - y0).max(0.0);
    let root = slope.sqrt();
    let mut total = 0.0;
    for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
        let f = 0.5 * (1.0 + node);
        let [u, v] = buf;
        h1.interp(k as f64 + f, u);
        h2.interp(y0 + slope * f, v);
        let sq: f64 = u.iter().zip(v.iter()).map(|(p, q)| (p - root * q).powi(2)).sum();
        total += weight * sq;
    }
    total * 0.5 * step
}

const REFINE_SWEEPS: usize = 40;
const REFINE_TOLERANCE: f64 = 1e-4;
const GOLDEN_STEPS: usize = 10;

/// Coordinate descent on the interior values of a warp (in grid units): each
/// value is moved between its neighbours by golden-section search on the two
/// adjacent cell costs. Stops when a sweep gains less than a relative
/// `REFINE_TOLERANCE`.
fn refine(h1: &Flat, h2: &Flat, y: &mut [f64], buf: &mut [Vec<f64>; 2]) {
    let n = y.len();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let total = |y: &[f64], buf: &mut [Vec<f64>; 2]| (0..n - 1).map(|k| cell_cost(h1, h2, k, y[k], y[k + 1], buf)).sum::<f64>();
    let mut energy = total(y, buf);
    for sweep in 0..REFINE_SWEEPS {
        let mut gain = 0.0;
        for s in 1..n - 1 {
            let i = if sweep % 2 == 0 { s } else { n - 1 - s };
            let (lo, hi) = (y[i - 1], y[i + 1]);
            let mut local = |g: f64| cell_cost(h1, h2, i - 1, lo, g, buf) + cell_cost(h1, h2, i, g, hi, buf);
            let current = local(y[i]);
            let (mut a, mut b) = (lo, hi);
            let mut c = b - ratio * (b - a);
            let mut d = a + ratio * (b - a);
            let (mut fc, mut fd) = (local(c), local(d));
            for _ in 0..GOLDEN_STEPS {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - ratio * (b - a);
                    fc = local(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + ratio * (b - a);
                    fd = local(d);
                }
            }
            let (g, fg) = if fc < fd { (c, fc) } else { (d, fd) };
            if fg < current {
                y[i] = g;
                gain += current - fg;
            }
        }
        if gain <= REFINE_TOLERANCE * energy {
            break;
        }
        energy -= gain;
    }
}

/// Result of aligning `h2` to `h1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Optimal warp γ*, to be applied to the second argument.
    pub warp: Warp,
    /// `dh(h1, (h2, γ*))`.
    pub distance: f64,
    /// `dh(h1, h2)`.
    pub before: f64,
    /// Minimal DP objective.
    pub cost: f64,
}

/// Minimal DP cost and the optimal lattice path from `(0, 0)` to `(T-1, T-1)`.
fn dp<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf) -> (f64, Vec<(usize, usize)>) {
    let n = h1.len();
    let (f1, f2) = (Flat::new(m, h1), Flat::new(m, h2));
    let steps = stencil();
    let mut cost = vec![f64::INFINITY; n * n];
    let mut from = vec![usize::MAX; n * n];
    cost[0] = 0.0;
    let mut buf = [vec![0.0; f1.dim], vec![0.0; f1.dim]];
    for i in 1..n {
        for j in 1..n {
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            for &(a, b) in &steps {
                if a > i || b > j {
                    continue;
                }
                let (k, l) = (i - a, j - b);
                let base = cost[k * n + l];
                if !base.is_finite() {
                    continue;
                }
                let c = base + segment_cost(&f1, &f2, k, l, i, j, &mut buf);
                if c < best {
                    best = c;
                    arg = k * n + l;
                }
            }
            cost[i * n + j] = best;
            from[i * n + j] = arg;
        }
    }
    let mut path = vec![(n - 1, n - 1)];
    let mut at = (n - 1) * n + (n - 1);
    while at != 0 {
        at = from[at];
        path.push((at / n, at % n));
    }
    path.reverse();
    (cost[n * n - 1], path)
}

fn path_to_warp(path: &[(usize, usize)], n: usize) -> Warp {
    let t = grid(n);
    let mut values = vec![0.0; n];
    for w in path.windows(2) {
        let ((k, l), (i, j)) = (w[0], w[1]);
        for (x, v) in values.iter_mut().enumerate().take(i + 1).skip(k) {
            let f = (x - k) as f64 / (i - k) as f64;
            *v = t[l] + f * (t[j] - t[l]);
        }
    }
    Warp::new(values).expect("lattice path is monotone")
}

/// DP cost of the optimal path. Exposed for oracle tests.
pub fn dp_cost<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf) -> Result<f64> {
    check_pair(h1, h2)?;
    Ok(dp(m, h1, h2).0)
}

/// Cost of an arbitrary lattice path under the same segment integral.
pub fn path_cost<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf, path: &[(usize, usize)]) -> f64 {
    let (f1, f2) = (Flat::new(m, h1), Flat::new(m, h2));
    let mut buf = [vec![0.0; f1.dim], vec![0.0; f1.dim]];
    path.windows(2)
        .map(|w| segment_cost(&f1, &f2, w[0].0, w[0].1, w[1].0, w[1].1, &mut buf))
        .sum()
}

fn check_pair(h1: &Tsrvf, h2: &Tsrvf) -> Result<()> {
    if !h1.reference().same_as(h2.reference()) {
        return Err(Error::MismatchedReference);
    }
    if h1.len() != h2.len() {
        return Err(Error::ShapeMismatch(format!(
            "TSRVF lengths {} and {}",
            h1.len(),
            h2.len()
        )));
    }
    if h1.len() < 2 {
        return Err(Error::InsufficientData("alignment needs at least two samples".into()));
    }
    Ok(())
}

/// Half-widths, in grid cells, of the moving averages tried on the lattice path.
const SMOOTHING: [usize; 6] = [1, 2, 3, 4, 6, 8];

/// Box average of half-width `w` applied twice, with odd reflection about
/// both ends so the result stays a warp.
fn smooth(warp: &Warp, w: usize) -> Warp {
    let v = warp.values();
    let n = v.len() as isize;
    let at = |s: &[f64], i: isize| -> f64 {
        if i < 0 {
            -s[(-i).min(n - 1) as usize]
        } else if i >= n {
            2.0 - s[(2 * (n - 1) - i).max(0) as usize]
        } else {
            s[i as usize]
        }
    };
    let pass = |s: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (i - w as isize..=i + w as isize).map(|k| at(s, k)).sum::<f64>() / (2 * w + 1) as f64)
            .collect()
    };
    let mut out = pass(&pass(v));
    out[0] = 0.0;
    out[v.len() - 1] = 1.0;
    Warp::new(out).unwrap_or_else(|_| warp.clone())
}

/// Finds γ* minimizing `∫ |h1(t) - h2(γ(t)) sqrt(γ̇(t))|² dt` over lattice
/// paths, then polishes it: the best of the path and its moving averages is
/// refined off the lattice by coordinate descent, and whichever warp gives
/// the smallest resampled distance is kept. The reported distance is never above
/// `dh(h1, h2)`: if the resampled optimum is worse than the identity, the
/// identity is returned.
pub fn align_pair<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf) -> Result<Alignment> {
    check_pair(h1, h2)?;
    let n = h1.len();
    let before = dh(m, h1, h2)?;
    let (cost, path) = dp(m, h1, h2);
    let mut warp = path_to_warp(&path, n);
    let mut distance = dh(m, h1, &warp_action(h2, &warp)?)?;
    let raw = warp.clone();
    for w in SMOOTHING.into_iter().filter(|&w| 2 * w < n) {
        let candidate = smooth(&raw, w);
        let d = dh(m, h1, &warp_action(h2, &candidate)?)?;
        if d < distance {
            distance = d;
            warp = candidate;
        }
    }
    let (f1, f2) = (Flat::new(m, h1), Flat::new(m, h2));
    let mut buf = [vec![0.0; f1.dim], vec![0.0; f1.dim]];
    let scale = (n - 1) as f64;
    let mut y: Vec<f64> = warp.values().iter().map(|v| v * scale).collect();
    refine(&f1, &f2, &mut y, &mut buf);
    if let Ok(refined) = Warp::new(y.iter().map(|v| v / scale).collect()) {
        let d = dh(m, h1, &warp_action(h2, &refined)?)?;
        if d < distance {
            distance = d;
            warp = refined;
        }
    }
    if distance > before {
        return Ok(Alignment {
            warp: Warp::identity(n),
            distance: before,
            before,
            cost,
        });
    }
    Ok(Alignment {
        warp,
        distance,
        before,
        cost,
    })
}

/// Symmetrized warping-invariant distance between two TSRVFs.
pub fn ds_tsrvf<M: Manifold + ?Sized>(m: &M, h1: &Tsrvf, h2: &Tsrvf) -> Result<f64> {
    let a = align_pair(m, h1, h2)?.distance;
    let b = align_pair(m, h2, h1)?.distance;
    Ok(a.min(b))
}

/// `d_s` between two trajectories with TSRVFs taken at `c`.
pub fn ds<M: Manifold + ?Sized>(m: &M, a1: &Trajectory, a2: &Trajectory, c: &Point) -> Result<f64> {
    if a1.len() != a2.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory lengths {} and {}",
            a1.len(),
            a2.len()
        )));
    }
    let h1 = compute_tsrvf(m, a1, c)?;
    let h2 = compute_tsrvf(m, a2, c)?;
    ds_tsrvf(m, &h1, &h2)
}

/// Registration result in the units written by the `register` command.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub alignment: Alignment,
    pub registered: Trajectory,
}

/// Aligns `a2` to `a1` and returns the warped second trajectory.
pub fn register<M: Manifold + ?Sized>(m: &M, a1: &Trajectory, a2: &Trajectory, c: &Point) -> Result<Registration> {
    let h1 = compute_tsrvf(m, a1, c)?;
    let h2 = compute_tsrvf(m, a2, c)?;
    let alignment = align_pair(m, &h1, &h2)?;
    let registered = crate::tsrvf::warp_trajectory(m, a2, &alignment.warp)?;
    Ok(Registration {
        alignment,
        registered,
    })
}
