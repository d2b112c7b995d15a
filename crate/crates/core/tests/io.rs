use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mwarp_core::io::{
    ingest_contours, parse_geo_csv, parse_hurdat2, parse_se2_csv, read_contours, select_hurricanes, tracks_to_dataset,
    write_contours_csv, write_geo_csv, write_se2_csv, Dataset, TimeAxis, Track,
};
use mwarp_core::synth::{contour_sequences, rng, SmoothCurve};
use mwarp_core::{Geometry, Manifold, Trajectory};

fn sample_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/hurdat2_sample.txt")
}

fn worst(m: &Geometry, a: &Trajectory, b: &Trajectory) -> f64 {
    (0..a.len()).map(|i| m.dist(a.point(i), b.point(i))).fold(0.0, f64::max)
}

#[test]
fn shipped_hurdat2_sample_parses() {
    let path = sample_file();
    let storms = parse_hurdat2(&std::fs::read_to_string(&path).unwrap(), &path).unwrap();
    assert_eq!(storms.len(), 30);
    assert!(storms.iter().all(|s| s.fixes.windows(2).all(|w| w[0].0 < w[1].0)));
    let picked = select_hurricanes(&storms, NaiveDate::from_ymd_opt(2005, 1, 1).unwrap(), 20, 12);
    assert_eq!(picked.len(), 12);
    let tracks: Vec<Track> = picked.iter().map(|s| s.to_track()).collect();
    let ds = tracks_to_dataset(&Geometry::s2(), &tracks, 50, TimeAxis::Observation).unwrap();
    assert_eq!((ds.len(), ds.grid_len()), (12, 50));
}

#[test]
fn exported_tracks_reingest_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new("tracks.csv");
    for m in [Geometry::s2(), Geometry::se2()] {
        let mut r = rng(6);
        let set: Vec<Trajectory> = (0..3).map(|_| SmoothCurve::random(&m, &mut r, 1.0).sample(&m, 30)).collect();
        let tracks: Vec<Track> = set
            .iter()
            .enumerate()
            .map(|(i, a)| Track::from_trajectory(&format!("t{i}"), Some(format!("c{}", i % 2)), a))
            .collect();
        let parsed = match m {
            Geometry::S2(_) => parse_geo_csv(&write_geo_csv(&tracks), src).unwrap(),
            _ => parse_se2_csv(&write_se2_csv(&tracks), src).unwrap(),
        };
        let ds = tracks_to_dataset(&m, &parsed, 30, TimeAxis::Observation).unwrap();
        assert_eq!(ds.labels.as_deref(), Some(&["c0".to_string(), "c1".into(), "c0".into()][..]));
        for (a, b) in set.iter().zip(&ds.trajectories) {
            assert!(worst(&m, a, b) < 1e-12, "{:?}", m.kind());
        }
        let file = dir.path().join("set.json");
        ds.save(&file).unwrap();
        let back = Dataset::load(&file).unwrap();
        for (a, b) in back.trajectories.iter().zip(&ds.trajectories) {
            assert!(worst(&m, a, b) < 1e-14);
        }
        if m == Geometry::s2() {
            assert_eq!(back.to_json().unwrap(), std::fs::read_to_string(&file).unwrap());
        }
    }
}

#[test]
fn denser_observations_change_little() {
    let m = Geometry::s2();
    let mut r = rng(21);
    let curve = SmoothCurve::random(&m, &mut r, 1.0);
    let track = |n: usize| Track::from_trajectory("a", None, &curve.sample(&m, n));
    let len = 100;
    let coarse = tracks_to_dataset(&m, &[track(60)], len, TimeAxis::Observation).unwrap();
    let fine = tracks_to_dataset(&m, &[track(120)], len, TimeAxis::Observation).unwrap();
    let exact = curve.sample(&m, len);
    let gap = worst(&m, &coarse.trajectories[0], &fine.trajectories[0]);
    assert!(gap < 1.0 / len as f64, "{gap}");
    assert!(worst(&m, &fine.trajectories[0], &exact) <= worst(&m, &coarse.trajectories[0], &exact));
}

#[test]
fn contour_frames_resample_to_the_grid() {
    let seqs = contour_sequences(2, 1, 80, 40, 3).unwrap();
    assert_eq!(seqs[0].contours.len(), 80);
    let ds = ingest_contours(&seqs, 17, 32, true).unwrap();
    assert_eq!((ds.len(), ds.grid_len()), (2, 17));
    assert_eq!(ds.geometry, Geometry::qsphere(32));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("blob.csv");
    std::fs::write(&file, write_contours_csv(&seqs[0])).unwrap();
    let back = read_contours(&file).unwrap();
    assert_eq!(back[0].id, "blob");
    assert_eq!(back[0].contours, seqs[0].contours);
}
