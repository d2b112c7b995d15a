//! Observed tracks: geographic CSV, HURDAT2 best-track text and SE(2) pose
//! CSV, resampled to uniform grids.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike};
use log::warn;

use super::Dataset;
use crate::error::{Error, Result};
use crate::manifold::{geo_to_unit, unit_to_geo, Geometry, Manifold, Point, SpecialEuclidean2};
use crate::tsrvf::Trajectory;
use crate::warp::grid;

/// Tracks with fewer observations are dropped on ingestion.
pub const MIN_OBSERVATIONS: usize = 4;

/// Parameterization of a track before uniform resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeAxis {
    /// Normalized observation time.
    #[default]
    Observation,
    /// Normalized cumulative geodesic length.
    ArcLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub point: Point,
}

/// Time-stamped points of one object, in increasing time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub label: Option<String>,
    pub observations: Vec<Observation>,
}

impl Track {
    /// A trajectory's samples at its grid times.
    pub fn from_trajectory(id: &str, label: Option<String>, a: &Trajectory) -> Self {
        Track {
            id: id.to_string(),
            label,
            observations: a
                .times()
                .into_iter()
                .zip(a.points())
                .map(|(time, p)| Observation { time, point: p.clone() })
                .collect(),
        }
    }
}

/// Uniform resampling to `len` samples by geodesic interpolation between
/// consecutive observations.
pub fn resample_track<M: Manifold + ?Sized>(m: &M, track: &Track, len: usize, axis: TimeAxis) -> Result<Trajectory> {
    let obs = &track.observations;
    if obs.len() < 2 {
        return Err(Error::EmptyTrack(track.id.clone()));
    }
    let raw: Vec<f64> = match axis {
        TimeAxis::Observation => obs.iter().map(|o| o.time).collect(),
        TimeAxis::ArcLength => {
            let mut acc = vec![0.0];
            for w in obs.windows(2) {
                acc.push(acc.last().unwrap() + m.dist(&w[0].point, &w[1].point));
            }
            acc
        }
    };
    let (t0, t1) = (raw[0], raw[raw.len() - 1]);
    if t1.is_nan() || t1 <= t0 {
        return Err(Error::DegenerateCurve(format!("track {} has zero extent", track.id)));
    }
    let u: Vec<f64> = raw.iter().map(|t| (t - t0) / (t1 - t0)).collect();
    let mut k = 0;
    let points = grid(len)
        .into_iter()
        .map(|t| {
            while k + 2 < u.len() && u[k + 1] <= t {
                k += 1;
            }
            while k + 2 < u.len() && u[k + 1] <= u[k] {
                k += 1;
            }
            let span = u[k + 1] - u[k];
            let f = if span > 0.0 { ((t - u[k]) / span).clamp(0.0, 1.0) } else { 1.0 };
            if f < 1e-12 {
                Ok(obs[k].point.clone())
            } else if f > 1.0 - 1e-12 {
                Ok(obs[k + 1].point.clone())
            } else {
                m.interpolate(&obs[k].point, &obs[k + 1].point, f).map_err(|e| e.at_index(k))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(m, points)
}

/// Resamples every track with enough observations; tracks with fewer than
/// [`MIN_OBSERVATIONS`] are skipped with a warning.
pub fn tracks_to_dataset(geometry: &Geometry, tracks: &[Track], len: usize, axis: TimeAxis) -> Result<Dataset> {
    let mut trajectories = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for t in tracks {
        if t.observations.len() < MIN_OBSERVATIONS {
            warn!("dropping track {} with {} observations", t.id, t.observations.len());
            continue;
        }
        trajectories.push(resample_track(geometry, t, len, axis)?);
        ids.push(t.id.clone());
        labels.push(t.label.clone());
    }
    if trajectories.is_empty() {
        return Err(Error::EmptyTrack(format!(
            "(all {} tracks have fewer than {MIN_OBSERVATIONS} observations)",
            tracks.len()
        )));
    }
    let labels = if labels.iter().all(Option::is_some) {
        Some(labels.into_iter().flatten().collect())
    } else {
        None
    };
    Ok(Dataset {
        geometry: geometry.clone(),
        trajectories,
        ids,
        labels,
        notes: Vec::new(),
    })
}

/// Numeric time, or a date-time (RFC 3339, `YYYY-MM-DD HH:MM[:SS]`) in seconds.
fn parse_time(s: &str) -> Option<f64> {
    if let Ok(x) = s.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Some(d.timestamp() as f64);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(d) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(d.and_utc().timestamp() as f64);
        }
    }
    None
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

struct Row {
    id: String,
    label: Option<String>,
    time: f64,
    values: Vec<f64>,
    line: usize,
}

/// Reads an id/time/value CSV with a header row.
fn read_rows(text: &str, source: &Path, value_cols: &[&[&str]], optional: &[&[&str]]) -> Result<(Vec<Row>, Vec<bool>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let need = |names: &[&str]| {
        column(&headers, names).ok_or_else(|| Error::parse(source, 1, format!("missing column {:?}", names[0])))
    };
    let id_col = need(&["id"])?;
    let time_col = need(&["time", "t", "timestamp", "index"])?;
    let cols = value_cols.iter().map(|n| need(n)).collect::<Result<Vec<_>>>()?;
    let opt_cols: Vec<Option<usize>> = optional.iter().map(|n| column(&headers, n)).collect();
    let label_col = column(&headers, &["label", "class"]);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| record.get(c).unwrap_or("");
        let time = parse_time(field(time_col))
            .ok_or_else(|| Error::parse(source, line, format!("bad time {:?}", field(time_col))))?;
        let mut values = Vec::with_capacity(cols.len() + opt_cols.len());
        for &c in cols.iter().chain(opt_cols.iter().flatten()) {
            let v: f64 = field(c)
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::parse(source, line, format!("bad number {:?}", field(c))))?;
            values.push(v);
        }
        rows.push(Row {
            id: field(id_col).to_string(),
            label: label_col.map(|c| field(c).to_string()).filter(|l| !l.is_empty()),
            time,
            values,
            line,
        });
    }
    Ok((rows, opt_cols.iter().map(Option::is_some).collect()))
}

type Group = (String, Option<String>, Vec<Row>);

/// Groups rows by id (in order of first appearance) and sorts each group by time.
fn group(rows: Vec<Row>, source: &Path) -> Result<Vec<Group>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for r in rows {
        if !groups.contains_key(&r.id) {
            order.push(r.id.clone());
        }
        groups.entry(r.id.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|id| {
            let mut g = groups.remove(&id).unwrap_or_default();
            g.sort_by(|a, b| a.time.total_cmp(&b.time));
            for w in g.windows(2) {
                if w[1].time == w[0].time {
                    return Err(Error::parse(source, w[1].line, format!("repeated time {} in track {id}", w[1].time)));
                }
            }
            let label = g.iter().find_map(|r| r.label.clone());
            Ok((id, label, g))
        })
        .collect()
}

/// Parses `id,time,lat,lon[,label]` rows (degrees) into tracks on S².
pub fn parse_geo_csv(text: &str, source: &Path) -> Result<Vec<Track>> {
    let (rows, _) = read_rows(text, source, &[&["lat", "latitude"], &["lon", "lng", "longitude"]], &[])?;
    for r in &rows {
        if r.values[0].abs() > 90.0 {
            return Err(Error::parse(source, r.line, format!("latitude {} out of range", r.values[0])));
        }
    }
    Ok(group(rows, source)?
        .into_iter()
        .map(|(id, label, g)| Track {
            id,
            label,
            observations: g
                .into_iter()
                .map(|r| Observation {
                    time: r.time,
                    point: geo_to_unit(r.values[0], r.values[1]),
                })
                .collect(),
        })
        .collect())
}

/// Parses `id,t,x,y[,theta][,label]` rows into SE(2) tracks. A missing
/// heading is taken from the direction of motion.
pub fn parse_se2_csv(text: &str, source: &Path) -> Result<Vec<Track>> {
    let (rows, present) = read_rows(text, source, &[&["x"], &["y"]], &[&["theta", "heading"]])?;
    let has_theta = present[0];
    group(rows, source)?
        .into_iter()
        .map(|(id, label, g)| {
            let xy: Vec<(f64, f64)> = g.iter().map(|r| (r.values[0], r.values[1])).collect();
            let theta: Vec<f64> = if has_theta {
                g.iter().map(|r| r.values[2]).collect()
            } else {
                headings(&xy)
            };
            Ok(Track {
                id,
                label,
                observations: g
                    .iter()
                    .zip(xy.iter().zip(theta))
                    .map(|(r, (&(x, y), th))| Observation {
                        time: r.time,
                        point: SpecialEuclidean2::from_pose(th, x, y),
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Direction of motion by central differences; stationary samples keep the
/// previous heading.
fn headings(xy: &[(f64, f64)]) -> Vec<f64> {
    let n = xy.len();
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let (dx, dy) = (xy[b].0 - xy[a].0, xy[b].1 - xy[a].1);
        let th = if dx.hypot(dy) > 1e-12 {
            dy.atan2(dx)
        } else {
            out.last().copied().unwrap_or(0.0)
        };
        out.push(th);
    }
    out
}

/// Parsed HURDAT2 storm.
#[derive(Debug, Clone, PartialEq)]
pub struct HurricaneTrack {
    /// Basin, number and year, e.g. `AL092005`.
    pub id: String,
    pub name: String,
    /// `(time, lat°, lon°)` best-track fixes.
    pub fixes: Vec<(NaiveDateTime, f64, f64)>,
}

impl HurricaneTrack {
    /// Fixes at 00, 06, 12 and 18 UTC.
    pub fn synoptic(&self) -> Vec<(NaiveDateTime, f64, f64)> {
        self.fixes
            .iter()
            .filter(|(t, _, _)| t.minute() == 0 && t.hour() % 6 == 0)
            .copied()
            .collect()
    }

    /// Synoptic fixes on S², time in hours since the first fix.
    pub fn to_track(&self) -> Track {
        let fixes = self.synoptic();
        let t0 = fixes.first().map(|f| f.0);
        Track {
            id: self.id.clone(),
            label: None,
            observations: fixes
                .iter()
                .map(|&(t, lat, lon)| Observation {
                    time: t0.map_or(0.0, |t0| (t - t0).num_minutes() as f64 / 60.0),
                    point: geo_to_unit(lat, lon),
                })
                .collect(),
        }
    }
}

fn parse_coord(s: &str, pos: char, neg: char, limit: f64) -> Option<f64> {
    let s = s.trim();
    let hemi = s.chars().last()?;
    let v: f64 = s[..s.len() - hemi.len_utf8()].trim().parse().ok()?;
    let v = match hemi {
        c if c == pos => v,
        c if c == neg => -v,
        _ => return None,
    };
    (v.abs() <= limit).then_some(v)
}

fn is_header(fields: &[&str]) -> bool {
    let id = fields[0].trim();
    id.len() == 8
        && id[..2].chars().all(|c| c.is_ascii_uppercase())
        && id[2..].chars().all(|c| c.is_ascii_digit())
}

/// Parses HURDAT2 text: a header `BBNNYYYY, NAME, COUNT,` followed by COUNT
/// data lines `YYYYMMDD, HHMM, ID, ST, LAT, LON, WIND, PRES, ...`.
pub fn parse_hurdat2(text: &str, source: &Path) -> Result<Vec<HurricaneTrack>> {
    let mut tracks: Vec<HurricaneTrack> = Vec::new();
    let mut expected = 0usize;
    let mut header_line = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if expected == 0 {
            if fields.len() < 3 || !is_header(&fields) {
                return Err(Error::parse(source, line, "expected a storm header line"));
            }
            expected = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, line, format!("bad entry count {:?}", fields[2].trim())))?;
            if expected == 0 {
                return Err(Error::parse(source, line, "storm with zero entries"));
            }
            header_line = line;
            tracks.push(HurricaneTrack {
                id: fields[0].trim().to_string(),
                name: fields[1].trim().to_string(),
                fixes: Vec::with_capacity(expected),
            });
            continue;
        }
        if fields.len() < 6 {
            return Err(Error::parse(source, line, format!("expected at least 6 fields, found {}", fields.len())));
        }
        let stamp = format!("{}{}", fields[0].trim(), fields[1].trim());
        let when = NaiveDateTime::parse_from_str(&stamp, "%Y%m%d%H%M")
            .map_err(|_| Error::parse(source, line, format!("bad date/time {stamp:?}")))?;
        let lat = parse_coord(fields[4], 'N', 'S', 90.0)
            .ok_or_else(|| Error::parse(source, line, format!("bad latitude {:?}", fields[4].trim())))?;
        let lon = parse_coord(fields[5], 'E', 'W', 360.0)
            .ok_or_else(|| Error::parse(source, line, format!("bad longitude {:?}", fields[5].trim())))?;
        let track = tracks.last_mut().expect("header precedes data");
        if let Some(last) = track.fixes.last() {
            if when <= last.0 {
                return Err(Error::parse(source, line, "fix times must increase"));
            }
        }
        track.fixes.push((when, lat, lon));
        expected -= 1;
    }
    if expected != 0 {
        return Err(Error::parse(
            source,
            header_line,
            format!("storm is missing {expected} data lines"),
        ));
    }
    Ok(tracks)
}

/// The reproducible subset rule: storms, in file order, whose first fix is on
/// or after `after` and that have at least `min_fixes` synoptic fixes; the
/// first `count` of them.
pub fn select_hurricanes(
    tracks: &[HurricaneTrack],
    after: NaiveDate,
    min_fixes: usize,
    count: usize,
) -> Vec<HurricaneTrack> {
    tracks
        .iter()
        .filter(|t| t.fixes.first().is_some_and(|f| f.0.date() >= after))
        .filter(|t| t.synoptic().len() >= min_fixes)
        .take(count)
        .cloned()
        .collect()
}

/// Whether the first non-blank line is a HURDAT2 storm header.
pub fn looks_like_hurdat2(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f.len() >= 3 && is_header(&f)
        })
        .unwrap_or(false)
}

/// Reads a geographic track file (CSV or HURDAT2, detected from the first
/// line) and resamples every track to `len` points on S².
pub fn ingest_geo(path: &Path, len: usize, axis: TimeAxis) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let tracks = if looks_like_hurdat2(&text) {
        parse_hurdat2(&text, path)?.iter().map(HurricaneTrack::to_track).collect()
    } else {
        parse_geo_csv(&text, path)?
    };
    let mut ds = tracks_to_dataset(&Geometry::s2(), &tracks, len, axis)?;
    ds.notes.push(format!("ingested from {}", path.display()));
    Ok(ds)
}

/// Reads an SE(2) pose CSV and resamples every track to `len` poses.
pub fn ingest_se2(path: &Path, len: usize, axis: TimeAxis) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let tracks = parse_se2_csv(&text, path)?;
    let mut ds = tracks_to_dataset(&Geometry::se2(), &tracks, len, axis)?;
    ds.notes.push(format!("ingested from {}", path.display()));
    Ok(ds)
}

/// `id,time,lat,lon[,label]` CSV of S² tracks.
pub fn write_geo_csv(tracks: &[Track]) -> String {
    let labelled = tracks.iter().all(|t| t.label.is_some()) && !tracks.is_empty();
    let mut out = String::from(if labelled { "id,time,lat,lon,label\n" } else { "id,time,lat,lon\n" });
    for t in tracks {
        for o in &t.observations {
            let (lat, lon) = unit_to_geo(&o.point);
            let _ = write!(out, "{},{},{},{}", t.id, o.time, lat, lon);
            if labelled {
                let _ = write!(out, ",{}", t.label.as_deref().unwrap_or(""));
            }
            out.push('\n');
        }
    }
    out
}

/// `id,t,x,y,theta[,label]` CSV of SE(2) tracks.
pub fn write_se2_csv(tracks: &[Track]) -> String {
    let labelled = tracks.iter().all(|t| t.label.is_some()) && !tracks.is_empty();
    let mut out = String::from(if labelled { "id,t,x,y,theta,label\n" } else { "id,t,x,y,theta\n" });
    for t in tracks {
        for o in &t.observations {
            let (th, x, y) = SpecialEuclidean2::to_pose(&o.point);
            let _ = write!(out, "{},{},{},{},{}", t.id, o.time, x, y, th);
            if labelled {
                let _ = write!(out, ",{}", t.label.as_deref().unwrap_or(""));
            }
            out.push('\n');
        }
    }
    out
}
