//! Datasets, the `mwarp/1` trajectory container, track and contour
//! ingestion, and CSV export.

mod contours;
mod export;
mod tracks;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::manifold::{Geometry, GeometrySpec, Manifold, ManifoldKind};
use crate::tsrvf::Trajectory;

pub use contours::{ingest_contours, read_contours, write_contours_csv, write_contours_json, ContourSequence, CONTOURS_FORMAT};
pub use export::{
    read_matrix_csv, write_ellipse_csv, write_matrix_csv, write_mds_csv, write_rho_csv, write_warp_csv,
    write_warps_csv,
};
pub use tracks::{
    ingest_geo, ingest_se2, looks_like_hurdat2, parse_geo_csv, parse_hurdat2, parse_se2_csv, resample_track, select_hurricanes, tracks_to_dataset,
    write_geo_csv, write_se2_csv, HurricaneTrack, Observation, TimeAxis, Track, MIN_OBSERVATIONS,
};

/// Format tag of trajectory containers.
pub const CONTAINER_FORMAT: &str = "mwarp/1";

/// Trajectories on one geometry, all with the same number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: Geometry,
    pub trajectories: Vec<Trajectory>,
    pub ids: Vec<String>,
    pub labels: Option<Vec<String>>,
    /// Free-form provenance.
    pub notes: Vec<String>,
}

impl Dataset {
    /// Checks ids, labels, manifold tags and the common length.
    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.trajectories.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} trajectories",
                self.ids.len(),
                self.trajectories.len()
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.trajectories.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} trajectories",
                    l.len(),
                    self.trajectories.len()
                )));
            }
        }
        if let Some(first) = self.trajectories.first() {
            for a in &self.trajectories {
                a.ensure_kind(&self.geometry)?;
                if a.len() != first.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "trajectories have {} and {} samples",
                        first.len(),
                        a.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Samples per trajectory (0 when empty).
    pub fn grid_len(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::len)
    }

    pub fn single(geometry: Geometry, id: &str, trajectory: Trajectory) -> Self {
        Dataset {
            geometry,
            trajectories: vec![trajectory],
            ids: vec![id.to_string()],
            labels: None,
            notes: Vec::new(),
        }
    }

    /// Serializes as a `mwarp/1` container.
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut doc = header(&self.geometry, self.grid_len());
        doc.notes = self.notes.clone();
        doc.trajectories = Some(
            self.trajectories
                .iter()
                .enumerate()
                .map(|(i, a)| TrajectoryDoc {
                    id: self.ids[i].clone(),
                    label: self.labels.as_ref().map(|l| l[i].clone()),
                    points: a.points().iter().map(|p| self.geometry.encode_point(p)).collect(),
                })
                .collect(),
        );
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Parses a `mwarp/1` container holding either `trajectories` or a single
    /// trajectory's `points`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ContainerDoc = serde_json::from_str(text)?;
        if doc.format != CONTAINER_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported container format {:?}",
                doc.format
            )));
        }
        let spec = match doc.manifold {
            ManifoldKind::S2 => GeometrySpec::S2,
            ManifoldKind::Se2 => GeometrySpec::Se2 {
                rotation_weight: doc.rotation_weight.unwrap_or(1.0),
            },
            ManifoldKind::QSphere => GeometrySpec::QSphere {
                samples: doc
                    .samples
                    .ok_or_else(|| Error::InvalidArgument("q-sphere container needs \"samples\"".into()))?,
            },
        };
        let geometry = Geometry::try_from(spec)?;
        let items: Vec<TrajectoryDoc> = match (doc.trajectories, doc.points) {
            (Some(t), None) => t,
            (None, Some(points)) => vec![TrajectoryDoc {
                id: "0".into(),
                label: None,
                points,
            }],
            _ => {
                return Err(Error::InvalidArgument(
                    "container needs exactly one of \"trajectories\" and \"points\"".into(),
                ))
            }
        };
        let mut trajectories = Vec::with_capacity(items.len());
        let mut ids = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for item in items {
            if item.points.len() != doc.t {
                return Err(Error::ShapeMismatch(format!(
                    "trajectory {} has {} points, container says T = {}",
                    item.id,
                    item.points.len(),
                    doc.t
                )));
            }
            let pts = item
                .points
                .iter()
                .map(|v| geometry.decode_point(v))
                .collect::<Result<Vec<_>>>()?;
            trajectories.push(Trajectory::new(&geometry, pts)?);
            ids.push(item.id);
            labels.push(item.label);
        }
        let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
            Some(labels.into_iter().flatten().collect())
        } else if labels.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::InvalidArgument("labels must be given for all trajectories or none".into()));
        };
        let ds = Dataset {
            geometry,
            trajectories,
            ids,
            labels,
            notes: doc.notes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serializes one trajectory as a `mwarp/1` container with `points`.
pub fn trajectory_to_json(geometry: &Geometry, trajectory: &Trajectory) -> Result<String> {
    trajectory.ensure_kind(geometry)?;
    let mut doc = header(geometry, trajectory.len());
    doc.points = Some(trajectory.points().iter().map(|p| geometry.encode_point(p)).collect());
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn header(geometry: &Geometry, t: usize) -> ContainerDoc {
    let (samples, rotation_weight) = match GeometrySpec::from(geometry) {
        GeometrySpec::S2 => (None, None),
        GeometrySpec::Se2 { rotation_weight } => (None, Some(rotation_weight)),
        GeometrySpec::QSphere { samples } => (Some(samples), None),
    };
    ContainerDoc {
        format: CONTAINER_FORMAT.into(),
        manifold: geometry.kind(),
        t,
        samples,
        rotation_weight,
        notes: Vec::new(),
        points: None,
        trajectories: None,
    }
}

#[derive(Serialize, Deserialize)]
struct ContainerDoc {
    format: String,
    manifold: ManifoldKind,
    #[serde(rename = "T")]
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trajectories: Option<Vec<TrajectoryDoc>>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    points: Vec<Value>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn container_round_trip() {
        for g in [Geometry::s2(), Geometry::qsphere(12)] {
            let mut r = synth::rng(4);
            let trajectories: Vec<_> = (0..3).map(|_| synth::random_trajectory(&g, &mut r, 9, 0.8)).collect();
            let ds = Dataset {
                geometry: g.clone(),
                trajectories,
                ids: vec!["a".into(), "b".into(), "c".into()],
                labels: Some(vec!["x".into(), "y".into(), "x".into()]),
                notes: vec!["test".into()],
            };
            let back = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn se2_round_trip_within_rounding() {
        let g = Geometry::se2();
        let mut r = synth::rng(5);
        let a = synth::random_trajectory(&g, &mut r, 7, 1.0);
        let ds = Dataset::single(g.clone(), "only", a.clone());
        let back = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
        for (p, q) in a.points().iter().zip(back.trajectories[0].points()) {
            assert!(g.dist(p, q) < 1e-14);
        }
    }

    #[test]
    fn single_trajectory_document() {
        let text = r#"{"format": "mwarp/1", "manifold": "s2", "T": 3,
                       "points": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}"#;
        let ds = Dataset::from_json(text).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.grid_len(), 3);
        let again = trajectory_to_json(&ds.geometry, &ds.trajectories[0]).unwrap();
        assert_eq!(Dataset::from_json(&again).unwrap(), ds);
    }

    #[test]
    fn container_errors() {
        assert!(Dataset::from_json(r#"{"format": "other", "manifold": "s2", "T": 0, "trajectories": []}"#).is_err());
        let wrong_t = r#"{"format": "mwarp/1", "manifold": "s2", "T": 4, "points": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}"#;
        assert!(matches!(Dataset::from_json(wrong_t), Err(Error::ShapeMismatch(_))));
        let off_sphere = r#"{"format": "mwarp/1", "manifold": "s2", "T": 3, "points": [[2, 0, 0], [0, 1, 0], [0, 0, 1]]}"#;
        assert!(Dataset::from_json(off_sphere).is_err());
        assert!(Dataset::from_json(r#"{"format": "mwarp/1", "manifold": "qsphere", "T": 0, "trajectories": []}"#).is_err());
    }
}
