//! Synthetic data: time warps, smooth random trajectories, and the labelled
//! datasets used by the experiments (vehicle motions, contour sequences,
//! migration and hurricane tracks).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::io::{ContourSequence, Dataset, Observation, Track};
use crate::manifold::{geo_to_unit, unit_to_geo, Geometry, Manifold, Point, SpecialEuclidean2};
use crate::tsrvf::{warp_trajectory, Trajectory};
use crate::warp::{grid, Warp};

/// Resolution of the fine grid on which warps are integrated.
const FINE: usize = 2001;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shapes of generated warps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpKind {
    /// `(e^{at} - 1)/(e^a - 1)` with `a = 5 strength` (convex).
    FastSlow,
    /// Same with `a = -5 strength` (concave).
    SlowFast,
    /// Normalized integral of a speed profile with 2 to 5 near-zero plateaus.
    StopAndGo,
}

impl FromStr for WarpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast-slow" => Ok(WarpKind::FastSlow),
            "slow-fast" => Ok(WarpKind::SlowFast),
            "stop-and-go" => Ok(WarpKind::StopAndGo),
            other => Err(Error::InvalidArgument(format!("unknown warp kind {other:?}"))),
        }
    }
}

impl fmt::Display for WarpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarpKind::FastSlow => "fast-slow",
            WarpKind::SlowFast => "slow-fast",
            WarpKind::StopAndGo => "stop-and-go",
        })
    }
}

/// Integrates a positive speed profile sampled on `[0, 1]` into a warp on
/// `len` grid points.
fn warp_from_speed(speed: &[f64], len: usize) -> Warp {
    let f = speed.len();
    let h = 1.0 / (f - 1) as f64;
    let mut cum = vec![0.0; f];
    for i in 1..f {
        cum[i] = cum[i - 1] + 0.5 * h * (speed[i - 1] + speed[i]);
    }
    let total = cum[f - 1];
    let values: Vec<f64> = grid(len)
        .into_iter()
        .map(|t| {
            let x = t * (f - 1) as f64;
            let k = (x.floor() as usize).min(f - 2);
            let a = x - k as f64;
            (cum[k] + a * (cum[k + 1] - cum[k])) / total
        })
        .collect();
    Warp::new(values).expect("integral of a positive speed is a warp")
}

/// Generated warp on `len` grid points. `strength` must lie in `(0, 1)`.
pub fn synth_warp(seed: u64, kind: WarpKind, strength: f64, len: usize) -> Result<Warp> {
    if !(strength > 0.0 && strength < 1.0) {
        return Err(Error::InvalidArgument(format!("warp strength {strength} not in (0, 1)")));
    }
    if len < 2 {
        return Err(Error::InvalidArgument("warp needs at least two samples".into()));
    }
    match kind {
        WarpKind::FastSlow | WarpKind::SlowFast => {
            let a = if kind == WarpKind::FastSlow { 5.0 } else { -5.0 } * strength;
            Warp::from_fn(len, |t| (a * t).exp_m1() / a.exp_m1())
        }
        WarpKind::StopAndGo => {
            let mut r = rng(seed);
            let plateaus = r.random_range(2..=5);
            let bumps: Vec<(f64, f64)> = (0..plateaus)
                .map(|_| (r.random_range(0.1..0.9), r.random_range(0.03..0.08)))
                .collect();
            let wobble: Vec<(f64, f64)> = (1..=3)
                .map(|k| (r.random_range(-0.3..0.3) / k as f64, r.random_range(0.0..2.0 * PI)))
                .collect();
            let speed: Vec<f64> = grid(FINE)
                .into_iter()
                .map(|t| {
                    let g: f64 = wobble
                        .iter()
                        .enumerate()
                        .map(|(k, (a, ph))| a * ((k + 1) as f64 * PI * t + ph).sin())
                        .sum();
                    let stop = bumps.iter().map(|&(c, w)| plateau(t, c, w)).fold(0.0, f64::max);
                    (strength * g).exp() * (1.0 - strength * 0.98 * stop)
                })
                .collect();
            Ok(warp_from_speed(&speed, len))
        }
    }
}

/// 1 on `|t - c| <= w`, cosine ramps of width 0.02 on either side.
fn plateau(t: f64, c: f64, w: f64) -> f64 {
    let d = (t - c).abs() - w;
    if d <= 0.0 {
        1.0
    } else if d < 0.02 {
        0.5 * (1.0 + (PI * d / 0.02).cos())
    } else {
        0.0
    }
}

/// Smooth random warp: `γ̇ ∝ exp(Σ_k c_k/k sin(kπt + φ_k))`, `|c_k| <= amplitude`.
pub fn random_warp<R: Rng>(rng: &mut R, len: usize, amplitude: f64) -> Warp {
    let terms: Vec<(f64, f64)> = (1..=3)
        .map(|k| {
            let c = if amplitude > 0.0 {
                rng.random_range(-amplitude..amplitude)
            } else {
                0.0
            };
            (c / k as f64, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let speed: Vec<f64> = grid(FINE)
        .into_iter()
        .map(|t| {
            terms
                .iter()
                .enumerate()
                .map(|(k, (c, ph))| c * ((k + 1) as f64 * PI * t + ph).sin())
                .sum::<f64>()
                .exp()
        })
        .collect();
    warp_from_speed(&speed, len)
}

fn gaussian_tangent<R: Rng>(m: &Geometry, rng: &mut R, p: &Point) -> DVector<f64> {
    let raw = DVector::from_fn(m.ambient_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = m.metric_sqrt_weights();
    let v = m.project_tangent(p, &raw.component_div(&w));
    let n = m.norm_raw(&v);
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

fn random_base<R: Rng>(m: &Geometry, rng: &mut R) -> Point {
    match m {
        Geometry::S2(_) => loop {
            let v = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = m.project(v);
            if p.0[2] > -0.3 {
                break p;
            }
        },
        Geometry::Se2(_) => SpecialEuclidean2::from_pose(
            rng.random_range(-1.0..1.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ),
        Geometry::QSphere(_) => {
            let c = m.default_reference();
            let v = gaussian_tangent(m, rng, &c) * 0.3;
            m.exp_raw(&c, &v)
        }
    }
}

/// Smooth random curve `α(t) = exp(p, v(t))` with `v` a random combination
/// of a linear term and three sine modes, scaled so `max |v| = 1.2 scale`.
/// Defined for every `t ∈ [0, 1]`, so it can be sampled at any resolution.
#[derive(Debug, Clone)]
pub struct SmoothCurve {
    base: Point,
    dirs: Vec<DVector<f64>>,
    coef: Vec<f64>,
}

impl SmoothCurve {
    pub fn random<R: Rng>(m: &Geometry, rng: &mut R, scale: f64) -> Self {
        let base = random_base(m, rng);
        let dirs: Vec<DVector<f64>> = (0..4).map(|_| gaussian_tangent(m, rng, &base)).collect();
        let coef: Vec<f64> = (0..4).map(|_| rng.random_range(0.3..1.0)).collect();
        let mut curve = SmoothCurve { base, dirs, coef };
        let peak = grid(FINE)
            .into_iter()
            .map(|t| m.norm_raw(&curve.velocity_field(t)))
            .fold(0.0, f64::max)
            .max(1e-12);
        let s = 1.2 * scale / peak;
        curve.coef.iter_mut().for_each(|c| *c *= s);
        curve
    }

    /// A nearby curve: same base point, every direction moved by a random
    /// tangent vector of norm `amount` and renormalized.
    pub fn perturb<R: Rng>(&self, m: &Geometry, rng: &mut R, amount: f64) -> Self {
        let dirs = self
            .dirs
            .iter()
            .map(|d| {
                let v = d + gaussian_tangent(m, rng, &self.base) * amount;
                let n = m.norm_raw(&v);
                if n > 0.0 {
                    v * (m.norm_raw(d) / n)
                } else {
                    d.clone()
                }
            })
            .collect();
        SmoothCurve {
            base: self.base.clone(),
            dirs,
            coef: self.coef.clone(),
        }
    }

    fn velocity_field(&self, t: f64) -> DVector<f64> {
        let mut v = &self.dirs[0] * (self.coef[0] * (t - 0.5) * 2.0);
        for k in 1..4 {
            v += &self.dirs[k] * (self.coef[k] * (k as f64 * PI * t).sin() / k as f64);
        }
        v
    }

    pub fn at(&self, m: &Geometry, t: f64) -> Point {
        m.exp_raw(&self.base, &self.velocity_field(t))
    }

    /// `α` on the uniform grid of `len` points.
    pub fn sample(&self, m: &Geometry, len: usize) -> Trajectory {
        Trajectory::from_parts(m.kind(), grid(len).into_iter().map(|t| self.at(m, t)).collect())
    }

    /// `α ∘ γ` on the grid of `γ`, evaluated exactly rather than interpolated.
    pub fn sample_warped(&self, m: &Geometry, gamma: &Warp) -> Trajectory {
        Trajectory::from_parts(m.kind(), gamma.values().iter().map(|&t| self.at(m, t)).collect())
    }
}

/// A [`SmoothCurve`] sampled at `len` points.
pub fn random_trajectory<R: Rng>(m: &Geometry, rng: &mut R, len: usize, scale: f64) -> Trajectory {
    SmoothCurve::random(m, rng, scale).sample(m, len)
}

/// `n` copies of `base`, each composed with a smooth random warp.
pub fn warped_copies(m: &Geometry, base: &Trajectory, n: usize, amplitude: f64, seed: u64) -> Result<Dataset> {
    let mut r = rng(seed);
    let trajectories = (0..n)
        .map(|_| {
            let w = random_warp(&mut r, base.len(), amplitude);
            warp_trajectory(m, base, &w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        geometry: m.clone(),
        ids: (0..n).map(|i| format!("copy{i:02}")).collect(),
        labels: None,
        trajectories,
        notes: vec![format!("{n} warped copies of one trajectory, seed {seed}")],
    })
}

/// Warped copies of one smooth S² trajectory.
pub fn warped_s2_dataset(n: usize, len: usize, seed: u64) -> Result<Dataset> {
    let m = Geometry::s2();
    let mut r = rng(seed);
    let base = random_trajectory(&m, &mut r, len, 1.0);
    warped_copies(&m, &base, n, 0.5, seed.wrapping_add(1))
}

/// Smooth step from 0 to 1 over `[c - w, c + w]`.
fn smooth_step(s: f64, c: f64, w: f64) -> f64 {
    let x = ((s - c) / w).clamp(-1.0, 1.0);
    0.5 + 0.5 * (0.5 * PI * x).sin()
}

/// Vehicle motions through an intersection on SE(2): 5 right turns,
/// 5 straight passes and 4 left turns, each observed with a stop-and-go warp.
pub fn vehicle_dataset(len: usize, seed: u64) -> Result<Dataset> {
    let m = Geometry::se2();
    let mut r = rng(seed);
    let classes = [("right", 5, -1.0), ("straight", 5, 0.0), ("left", 4, 1.0)];
    let mut trajectories = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (name, count, turn) in classes {
        for k in 0..count {
            let center = r.random_range(0.1..0.9);
            let width = r.random_range(0.03..0.05);
            let lane = r.random_range(-0.15..0.15);
            let length = r.random_range(3.6..4.4);
            let sweep = turn * FRAC_PI_2 * r.random_range(0.9..1.1);
            let fine = 4001;
            let mut pts = Vec::with_capacity(fine);
            let (mut x, mut y) = (lane, -0.5 * length);
            let ds = length / (fine - 1) as f64;
            let mut prev: Option<f64> = None;
            for s in grid(fine) {
                let theta = FRAC_PI_2 + sweep * smooth_step(s, center, width);
                if let Some(p) = prev {
                    let mid = 0.5 * (p + theta);
                    x += ds * mid.cos();
                    y += ds * mid.sin();
                }
                prev = Some(theta);
                pts.push(SpecialEuclidean2::from_pose(theta, x, y));
            }
            let path = Trajectory::from_parts(m.kind(), pts);
            let strength = r.random_range(0.8..0.98);
            let warp_seed: u64 = r.random();
            let gamma = synth_warp(warp_seed, WarpKind::StopAndGo, strength, len)?;
            let pts = gamma
                .values()
                .iter()
                .map(|&s| crate::tsrvf::evaluate(&m, path.points(), s))
                .collect::<Result<Vec<_>>>()?;
            trajectories.push(Trajectory::from_parts(m.kind(), pts));
            ids.push(format!("{name}{k}"));
            labels.push(name.to_string());
        }
    }
    Ok(Dataset {
        geometry: m,
        trajectories,
        ids,
        labels: Some(labels),
        notes: vec![format!("synthetic intersection motions, stop-and-go warps, seed {seed}")],
    })
}

/// Radius of the class-`c` contour at angle φ and phase τ ∈ [0, 1].
fn contour_radius(class: usize, phi: f64, tau: f64, amp: f64) -> f64 {
    let wave = (2.0 * PI * tau).sin();
    match class % 4 {
        0 => 1.0 + amp * 0.35 * wave * (2.0 * phi).cos(),
        1 => 1.0 + amp * 0.3 * (3.0 * phi - 2.0 * PI * tau).cos(),
        2 => 1.0 + amp * 0.6 * tau * tau * (-(phi - FRAC_PI_2).powi(2) / 0.2).exp(),
        _ => 1.0 + amp * 0.25 * (4.0 * PI * tau).sin() * (phi.cos() * 3.0).sin(),
    }
}

/// Contour sequences in `classes` classes: every sequence is a warped copy of
/// its class's base motion, with per-sequence amplitude jitter and vertex noise.
pub fn contour_sequences(
    classes: usize,
    per_class: usize,
    frames: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<ContourSequence>> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for k in 0..per_class {
            let amp = r.random_range(0.9..1.1);
            let gamma = random_warp(&mut r, frames, 0.9);
            let contours = gamma
                .values()
                .iter()
                .map(|&tau| {
                    (0..points)
                        .map(|i| {
                            let phi = 2.0 * PI * i as f64 / points as f64;
                            let rad = contour_radius(c, phi, tau, amp) + 0.003 * r.sample::<f64, _>(StandardNormal);
                            [rad * phi.cos(), rad * phi.sin()]
                        })
                        .collect()
                })
                .collect();
            out.push(ContourSequence {
                id: format!("class{c}_{k:02}"),
                label: Some(format!("class{c}")),
                times: None,
                contours,
            });
        }
    }
    Ok(out)
}

/// Migration-like tracks from a breeding area to a wintering area with
/// irregular observation times and individually varying travel pace.
pub fn migration_tracks(n: usize, seed: u64) -> Vec<Track> {
    let m = Geometry::s2();
    let mut r = rng(seed);
    let start = geo_to_unit(45.0, -110.0);
    let end = geo_to_unit(-30.0, -62.0);
    let route = m.log_raw(&start, &end).expect("route endpoints are not antipodal");
    let side = {
        let axis = DVector::from_vec(vec![
            start.0[1] * end.0[2] - start.0[2] * end.0[1],
            start.0[2] * end.0[0] - start.0[0] * end.0[2],
            start.0[0] * end.0[1] - start.0[1] * end.0[0],
        ]);
        axis.normalize()
    };
    (0..n)
        .map(|i| {
            let bend = r.random_range(-0.12..0.12);
            let jitter = r.random_range(-0.05..0.05);
            let gamma = random_warp(&mut r, 401, 0.8);
            let count = r.random_range(25..60);
            let mut times: Vec<f64> = (0..count).map(|_| r.random_range(0.0..1.0)).collect();
            times.push(0.0);
            times.push(1.0);
            times.sort_by(f64::total_cmp);
            times.dedup();
            let observations = times
                .iter()
                .map(|&t| {
                    let s = gamma.eval(t);
                    let along = m.exp_raw(&start, &(&route * s));
                    let offset = m.project_tangent(&along, &side) * (bend * (PI * s).sin() + jitter);
                    Observation {
                        time: t * 120.0,
                        point: m.exp_raw(&along, &offset),
                    }
                })
                .collect();
            Track {
                id: format!("bird{i:02}"),
                label: None,
                observations,
            }
        })
        .collect()
}

/// HURDAT2-format text for `count` synthetic Atlantic storms, one per year
/// from `first_year`, with six-hourly fixes.
pub fn hurdat2_text(count: usize, first_year: i32, seed: u64) -> String {
    let m = Geometry::s2();
    let mut r = rng(seed);
    let mut out = String::new();
    for k in 0..count {
        let year = first_year + (k / 3) as i32;
        let fixes = r.random_range(14..44);
        let lat0 = r.random_range(10.0..18.0);
        let lon0 = r.random_range(-55.0..-30.0);
        let turn_lat = r.random_range(24.0..32.0);
        let recurve_lon = r.random_range(-80.0..-60.0);
        let a = geo_to_unit(lat0, lon0);
        let b = geo_to_unit(turn_lat, recurve_lon);
        let c = geo_to_unit(turn_lat + r.random_range(12.0..20.0), recurve_lon + r.random_range(15.0..30.0));
        let gamma = random_warp(&mut r, 301, 1.0);
        let date = NaiveDate::from_ymd_opt(year, 8, 1).expect("valid date")
            + Duration::days(r.random_range(0..50));
        let mut start = date.and_hms_opt(0, 0, 0).expect("valid time");
        start += Duration::hours(6 * r.random_range(0..4));
        let name = NAMES[k % NAMES.len()];
        let _ = writeln!(out, "AL{:02}{year}, {:>18}, {:>6},", k % 3 + 1, name, fixes);
        for i in 0..fixes {
            let t = i as f64 / (fixes - 1) as f64;
            let s = gamma.eval(t);
            // Piecewise geodesic a -> b -> c, with the corner rounded by blending.
            let p1 = m.interpolate(&a, &b, (s / 0.6).min(1.0)).expect("no antipodes");
            let p2 = m.interpolate(&b, &c, ((s - 0.6) / 0.4).clamp(0.0, 1.0)).expect("no antipodes");
            let blend = smooth_step(s, 0.6, 0.12);
            let p = m.interpolate(&p1, &p2, blend).expect("no antipodes");
            let (lat, lon) = unit_to_geo(&p);
            let when = start + Duration::hours(6 * i as i64);
            let wind = 35 + (60.0 * (PI * t).sin()) as i32;
            let pressure = 1010 - (wind - 35) / 2;
            let status = if wind >= 64 { "HU" } else { "TS" };
            let _ = writeln!(
                out,
                "{}, {},  , {}, {:>5}, {:>6}, {:>3}, {:>4}, -999, -999, -999, -999, -999, -999, -999, -999, -999, -999, -999, -999, -999,",
                when.format("%Y%m%d"),
                when.format("%H%M"),
                status,
                format_lat(lat),
                format_lon(lon),
                wind,
                pressure
            );
        }
    }
    out
}

fn format_lat(lat: f64) -> String {
    format!("{:.1}{}", lat.abs(), if lat >= 0.0 { 'N' } else { 'S' })
}

fn format_lon(lon: f64) -> String {
    format!("{:.1}{}", lon.abs(), if lon >= 0.0 { 'E' } else { 'W' })
}

const NAMES: [&str; 12] = [
    "ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOXTROT", "GOLF", "HOTEL", "INDIA", "JULIET", "KILO", "LIMA",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_warps() {
        let fs = synth_warp(0, WarpKind::FastSlow, 0.5, 101).unwrap();
        let sf = synth_warp(0, WarpKind::SlowFast, 0.5, 101).unwrap();
        let d = fs.derivative();
        assert!(d.windows(2).all(|w| w[1] >= w[0]));
        let d = sf.derivative();
        assert!(d.windows(2).all(|w| w[1] <= w[0]));
        let weak = synth_warp(0, WarpKind::FastSlow, 1e-6, 101).unwrap();
        assert!(weak.sup_distance(&Warp::identity(101)) < 1e-5);
        assert!(synth_warp(0, WarpKind::StopAndGo, 1.0, 10).is_err());
        assert!(synth_warp(0, WarpKind::StopAndGo, 0.0, 10).is_err());
    }

    #[test]
    fn stop_and_go_has_plateaus() {
        let w = synth_warp(7, WarpKind::StopAndGo, 0.9, 400).unwrap();
        let d = w.derivative();
        let slow = d.iter().filter(|&&x| x < 0.2).count();
        assert!(slow >= 20, "{slow}");
        let weak = synth_warp(7, WarpKind::StopAndGo, 1e-6, 400).unwrap();
        assert!(weak.sup_distance(&Warp::identity(400)) < 1e-5);
    }

    #[test]
    fn random_trajectories_are_valid() {
        for g in [Geometry::s2(), Geometry::se2(), Geometry::qsphere(16)] {
            let mut r = rng(3);
            let a = random_trajectory(&g, &mut r, 50, 1.0);
            assert!(Trajectory::new(&g, a.points().to_vec()).is_ok());
        }
    }

    #[test]
    fn vehicle_dataset_shape() {
        let d = vehicle_dataset(60, 1).unwrap();
        assert_eq!(d.trajectories.len(), 14);
        let labels = d.labels.unwrap();
        assert_eq!(labels.iter().filter(|l| *l == "left").count(), 4);
        for a in &d.trajectories {
            assert!(Trajectory::new(&d.geometry, a.points().to_vec()).is_ok());
        }
    }

    #[test]
    fn hurdat2_text_shape() {
        let text = hurdat2_text(2, 2005, 1);
        assert!(text.starts_with("AL012005,"));
        let storms = crate::io::parse_hurdat2(&text, std::path::Path::new("synthetic")).unwrap();
        assert_eq!(storms.len(), 2);
        assert!(storms.iter().all(|s| s.fixes.len() >= 14));
    }
}
