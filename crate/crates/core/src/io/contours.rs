//! Sequences of closed planar contours, converted to trajectories on the
//! q-sphere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tracks::{tracks_to_dataset, Observation, TimeAxis, Track};
use super::Dataset;
use crate::error::{Error, Result};
use crate::manifold::{rotation_align, Geometry, PlanarCurve, PreShapeSphere};

pub const CONTOURS_FORMAT: &str = "mwarp-contours/1";

/// Frames of one deforming shape. Every contour is a closed polygon given
/// without repeating its first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSequence {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Frame times; frame indices when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub contours: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ContoursDoc {
    format: String,
    sequences: Vec<ContourSequence>,
}

/// Serializes sequences as a `mwarp-contours/1` JSON document.
pub fn write_contours_json(seqs: &[ContourSequence]) -> Result<String> {
    Ok(serde_json::to_string(&ContoursDoc {
        format: CONTOURS_FORMAT.into(),
        sequences: seqs.to_vec(),
    })?)
}

fn parse_json(text: &str, path: &Path) -> Result<Vec<ContourSequence>> {
    let doc: ContoursDoc = serde_json::from_str(text)?;
    if doc.format != CONTOURS_FORMAT {
        return Err(Error::parse(path, 1, format!("unsupported format {:?}", doc.format)));
    }
    for s in &doc.sequences {
        if let Some(t) = &s.times {
            if t.len() != s.contours.len() {
                return Err(Error::ShapeMismatch(format!(
                    "sequence {} has {} times for {} contours",
                    s.id,
                    t.len(),
                    s.contours.len()
                )));
            }
        }
    }
    Ok(doc.sequences)
}

/// One sequence as blocks of `x,y` rows, one block per frame, blocks
/// separated by blank lines. An `x,y` header line is optional.
fn parse_csv(text: &str, path: &Path) -> Result<ContourSequence> {
    let mut contours: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut block: Vec<[f64; 2]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            if !block.is_empty() {
                contours.push(std::mem::take(&mut block));
            }
            continue;
        }
        if i == 0 && line.replace(' ', "").eq_ignore_ascii_case("x,y") {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let mut coord = || -> Option<f64> { fields.next()?.parse::<f64>().ok().filter(|v| v.is_finite()) };
        match (coord(), coord(), fields.next()) {
            (Some(x), Some(y), None) => block.push([x, y]),
            _ => return Err(Error::parse(path, i + 1, format!("expected x,y but found {line:?}"))),
        }
    }
    if !block.is_empty() {
        contours.push(block);
    }
    if contours.is_empty() {
        return Err(Error::EmptyTrack(path.display().to_string()));
    }
    Ok(ContourSequence {
        id: path.file_stem().map_or_else(|| "contours".into(), |s| s.to_string_lossy().into_owned()),
        label: None,
        times: None,
        contours,
    })
}

/// One sequence in the blank-line-separated block layout.
pub fn write_contours_csv(seq: &ContourSequence) -> String {
    let mut out = String::from("x,y\n");
    for (k, c) in seq.contours.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for v in c {
            out.push_str(&format!("{},{}\n", v[0], v[1]));
        }
    }
    out
}

/// Reads a contour file: a JSON document of sequences when the extension is
/// `.json`, otherwise a single CSV block sequence named after the file.
pub fn read_contours(path: &Path) -> Result<Vec<ContourSequence>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => parse_json(&text, path),
        _ => Ok(vec![parse_csv(&text, path)?]),
    }
}

/// q-functions with `samples` points per contour, resampled in time to `len`
/// frames. With `align_rotation`, every frame is rotated onto its predecessor.
pub fn ingest_contours(seqs: &[ContourSequence], len: usize, samples: usize, align_rotation: bool) -> Result<Dataset> {
    let sphere = PreShapeSphere::new(samples);
    let tracks = seqs
        .iter()
        .map(|s| {
            let mut observations: Vec<Observation> = Vec::with_capacity(s.contours.len());
            for (k, c) in s.contours.iter().enumerate() {
                let curve = PlanarCurve::new(c.clone())
                    .map_err(|e| Error::DegenerateCurve(format!("sequence {} frame {k}: {e}", s.id)))?;
                let mut q = sphere.q_function(&curve)?;
                if align_rotation {
                    if let Some(prev) = observations.last() {
                        q = rotation_align(&prev.point, &q).1;
                    }
                }
                let time = s.times.as_ref().map_or(k as f64, |t| t[k]);
                observations.push(Observation { time, point: q });
            }
            Ok(Track {
                id: s.id.clone(),
                label: s.label.clone(),
                observations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    tracks_to_dataset(&Geometry::qsphere(samples), &tracks, len, TimeAxis::Observation)
}
