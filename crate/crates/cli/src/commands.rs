use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mwarp_core::analysis::{distance_matrix, hierarchical_cluster, knn_classify, mds, DistanceMatrix, Metric};
use mwarp_core::io::{
    ingest_contours, ingest_se2, looks_like_hurdat2, parse_geo_csv, parse_hurdat2, read_contours, read_matrix_csv,
    select_hurricanes, tracks_to_dataset, write_contours_json, write_ellipse_csv, write_geo_csv, write_matrix_csv,
    write_mds_csv, write_rho_csv, write_warp_csv, write_warps_csv, Dataset, HurricaneTrack, TimeAxis, Track,
};
use mwarp_core::model::{fit_model, p_values, sample_many, GaussianModel};
use mwarp_core::registration::align_pair;
use mwarp_core::stats::{cross_sectional_summary, karcher_mean_trajectories, KarcherOptions};
use mwarp_core::synth::{
    contour_sequences, hurdat2_text, migration_tracks, synth_warp, vehicle_dataset, warped_s2_dataset,
};
use mwarp_core::tsrvf::{compute_tsrvf, dh, warp_trajectory};
use mwarp_core::{Error, Geometry, Manifold, ManifoldKind, Point, Trajectory};
use serde_json::json;

use crate::{
    ClassifyArgs, Cli, Command, DistmatArgs, Global, IngestArgs, InputFormat, MatrixInput, MdsArgs, MeanArgs,
    ModelCommand, ModelFitArgs, ModelPvalueArgs, ModelSampleArgs, RegisterArgs, SimKind, SimulateArgs,
};

/// Samples per trajectory when `--grid` is absent.
const DEFAULT_GRID: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// Stable short name printed with every error.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                Error::CutLocus { .. } => "cut-locus",
                Error::BaseMismatch => "base-mismatch",
                Error::InvalidPoint(_) => "invalid-point",
                Error::InvalidTangent(_) => "invalid-tangent",
                Error::DegenerateCurve(_) => "degenerate-curve",
                Error::MismatchedReference => "mismatched-reference",
                Error::ShapeMismatch(_) => "shape-mismatch",
                Error::MismatchedManifold { .. } => "manifold-mismatch",
                Error::InvalidWarp(_) => "invalid-warp",
                Error::NoConvergence { .. } => "no-convergence",
                Error::InsufficientData(_) => "insufficient-data",
                Error::InvalidArgument(_) => "invalid-argument",
                Error::Parse { .. } => "parse",
                Error::EmptyTrack(_) => "empty-track",
                Error::Io(_) => "io",
                Error::Json(_) => "json",
                Error::Csv(_) => "csv",
            },
        }
    }

    /// 1 for usage errors, 2 for data errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidArgument(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest(a) => ingest(g, &a),
        Command::Register(a) => register(g, &a),
        Command::Distmat(a) => distmat(g, &a),
        Command::Mean(a) => mean(g, &a),
        Command::Model(ModelCommand::Fit(a)) => model_fit(g, &a),
        Command::Model(ModelCommand::Sample(a)) => model_sample(g, &a),
        Command::Model(ModelCommand::Pvalue(a)) => model_pvalue(g, &a),
        Command::Classify(a) => classify(g, &a),
        Command::Cluster(a) => cluster(g, &a),
        Command::Mds(a) => mds_cmd(g, &a),
        Command::Simulate(a) => simulate(g, &a),
    }
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn out_dir(g: &Global, command: &str) -> Result<PathBuf> {
    let dir = g
        .out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{command} writes several files and needs --out <DIR>")))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn grid_len(g: &Global) -> usize {
    g.grid.unwrap_or(DEFAULT_GRID)
}

/// Loads a container, checks `--manifold` and resamples to `--grid`.
fn load_dataset(g: &Global, path: &Path) -> Result<Dataset> {
    let ds = Dataset::load(path)?;
    if let Some(kind) = g.manifold {
        if kind != ds.geometry.kind() {
            return Err(Error::MismatchedManifold {
                expected: kind.to_string(),
                found: ds.geometry.kind().to_string(),
            }
            .into());
        }
    }
    match g.grid {
        Some(len) if len != ds.grid_len() => resample(ds, len),
        _ => Ok(ds),
    }
}

fn resample(ds: Dataset, len: usize) -> Result<Dataset> {
    let tracks: Vec<Track> = ds
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, a)| Track::from_trajectory(&ds.ids[i], ds.labels.as_ref().map(|l| l[i].clone()), a))
        .collect();
    let mut out = tracks_to_dataset(&ds.geometry, &tracks, len, TimeAxis::Observation)?;
    out.notes = ds.notes;
    out.notes.push(format!("resampled to {len} samples"));
    Ok(out)
}

fn reference(g: &Global, geometry: &Geometry, trajs: &[Trajectory]) -> Result<Point> {
    Ok(g.ref_point.resolve(geometry, trajs)?)
}

fn ingest(g: &Global, a: &IngestArgs) -> Result<()> {
    let len = grid_len(g);
    let axis = if a.arc_length { TimeAxis::ArcLength } else { TimeAxis::Observation };
    let format = match a.format {
        InputFormat::Auto => detect_format(g, &a.input)?,
        f => f,
    };
    let mut ds = match format {
        InputFormat::Geo | InputFormat::Hurdat2 => {
            let text = fs::read_to_string(&a.input)?;
            let tracks = if format == InputFormat::Hurdat2 || looks_like_hurdat2(&text) {
                let mut storms = parse_hurdat2(&text, &a.input)?;
                if a.after.is_some() || a.count.is_some() {
                    storms = select_hurricanes(
                        &storms,
                        a.after.unwrap_or(NaiveDate::MIN),
                        a.min_fixes,
                        a.count.unwrap_or(usize::MAX),
                    );
                }
                storms.iter().map(HurricaneTrack::to_track).collect()
            } else {
                parse_geo_csv(&text, &a.input)?
            };
            tracks_to_dataset(&Geometry::s2(), &tracks, len, axis)?
        }
        InputFormat::Se2 => ingest_se2(&a.input, len, axis)?,
        InputFormat::Contours => {
            ingest_contours(&read_contours(&a.input)?, len, g.samples, !a.no_rotation_align)?
        }
        InputFormat::Container => load_dataset(g, &a.input)?,
        InputFormat::Auto => unreachable!("format already detected"),
    };
    if format != InputFormat::Container {
        let name = a.input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        ds.notes.push(format!("ingested from {name}"));
    }
    emit(g, &ds.to_json()?)
}

fn detect_format(g: &Global, path: &Path) -> Result<InputFormat> {
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        return Ok(match value.get("format").and_then(|f| f.as_str()) {
            Some(mwarp_core::io::CONTOURS_FORMAT) => InputFormat::Contours,
            _ => InputFormat::Container,
        });
    }
    match g.manifold {
        Some(ManifoldKind::S2) => Ok(InputFormat::Geo),
        Some(ManifoldKind::Se2) => Ok(InputFormat::Se2),
        Some(ManifoldKind::QSphere) => Ok(InputFormat::Contours),
        None => Err(CliError::Usage(format!(
            "cannot tell the format of {}; pass --manifold or --format",
            path.display()
        ))),
    }
}

fn pick(ds: &Dataset, id: Option<&str>, path: &Path) -> Result<(String, Trajectory)> {
    let i = match id {
        Some(id) => ds
            .ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| CliError::Usage(format!("no trajectory {id:?} in {}", path.display())))?,
        None if ds.len() == 1 => 0,
        None => {
            return Err(CliError::Usage(format!(
                "{} holds {} trajectories; choose one by id",
                path.display(),
                ds.len()
            )))
        }
    };
    Ok((ds.ids[i].clone(), ds.trajectories[i].clone()))
}

fn register(g: &Global, a: &RegisterArgs) -> Result<()> {
    let dir = out_dir(g, "register")?;
    let d1 = load_dataset(g, &a.first)?;
    let d2 = load_dataset(g, &a.second)?;
    let (id1, a1) = pick(&d1, a.first_id.as_deref(), &a.first)?;
    let (id2, a2) = pick(&d2, a.second_id.as_deref(), &a.second)?;
    let m = &d1.geometry;
    let c = reference(g, m, &[a1.clone(), a2.clone()])?;
    let h1 = compute_tsrvf(m, &a1, &c)?;
    let h2 = compute_tsrvf(m, &a2, &c)?;
    let alignment = align_pair(m, &h1, &h2)?;
    let registered = warp_trajectory(m, &a2, &alignment.warp)?;
    let record = json!({
        "first": id1,
        "second": id2,
        "reference": m.encode_point(&c),
        "d_before": dh(m, &h1, &h2)?,
        "d_after": alignment.distance,
    });
    let text = pretty(&record)?;
    fs::write(dir.join("warp.csv"), write_warp_csv(&alignment.warp))?;
    fs::write(dir.join("register.json"), &text)?;
    Dataset::single(m.clone(), &id2, registered).save(&dir.join("registered.json"))?;
    print!("{text}");
    Ok(())
}

fn matrix_of(g: &Global, ds: &Dataset, metric: Metric) -> Result<DistanceMatrix> {
    let c = reference(g, &ds.geometry, &ds.trajectories)?;
    Ok(distance_matrix(&ds.geometry, &ds.trajectories, ds.ids.clone(), metric, &c)?)
}

fn distmat(g: &Global, a: &DistmatArgs) -> Result<()> {
    let ds = load_dataset(g, &a.dataset)?;
    emit(g, &write_matrix_csv(&matrix_of(g, &ds, a.metric)?))
}

/// A matrix from a CSV file, or computed from a container, plus the
/// container's labels when it has them.
fn load_matrix(g: &Global, input: &MatrixInput) -> Result<(DistanceMatrix, Option<Vec<String>>)> {
    let csv = input.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        let text = fs::read_to_string(&input.input)?;
        Ok((read_matrix_csv(&text, &input.input, input.metric)?, None))
    } else {
        let ds = load_dataset(g, &input.input)?;
        Ok((matrix_of(g, &ds, input.metric)?, ds.labels))
    }
}

/// Labels for the matrix ids, taken from a container.
fn labels_for(dm: &DistanceMatrix, path: &Path) -> Result<Vec<String>> {
    let ds = Dataset::load(path)?;
    let labels = ds
        .labels
        .ok_or_else(|| CliError::Usage(format!("{} has no labels", path.display())))?;
    dm.ids
        .iter()
        .map(|id| {
            ds.ids
                .iter()
                .position(|x| x == id)
                .map(|i| labels[i].clone())
                .ok_or_else(|| CliError::Core(Error::ShapeMismatch(format!("no label for {id:?} in {}", path.display()))))
        })
        .collect()
}

fn classify(g: &Global, a: &ClassifyArgs) -> Result<()> {
    let (dm, own) = load_matrix(g, &a.matrix)?;
    let labels = match (&a.labels, own) {
        (Some(path), _) => labels_for(&dm, path)?,
        (None, Some(l)) => l,
        (None, None) => return Err(CliError::Usage("classification needs labels; pass --labels <CONTAINER>".into())),
    };
    let result = knn_classify(&dm, &labels, a.k)?;
    let predictions: Vec<_> = dm
        .ids
        .iter()
        .zip(&labels)
        .zip(&result.predictions)
        .map(|((id, label), predicted)| json!({ "id": id, "label": label, "predicted": predicted }))
        .collect();
    emit(
        g,
        &pretty(&json!({
            "metric": dm.metric.to_string(),
            "k": a.k,
            "rate": result.rate,
            "predictions": predictions,
        }))?,
    )
}

fn cluster(g: &Global, a: &MatrixInput) -> Result<()> {
    let (dm, _) = load_matrix(g, a)?;
    emit(g, &(serde_json::to_string_pretty(&hierarchical_cluster(&dm))? + "\n"))
}

fn mds_cmd(g: &Global, a: &MdsArgs) -> Result<()> {
    let (dm, own) = load_matrix(g, &a.matrix)?;
    let labels = match &a.labels {
        Some(path) => Some(labels_for(&dm, path)?),
        None => own,
    };
    let coords = mds(&dm, a.dim)?;
    emit(g, &write_mds_csv(&dm.ids, labels.as_deref(), &coords))
}

fn mean(g: &Global, a: &MeanArgs) -> Result<()> {
    let dir = out_dir(g, "mean")?;
    let ds = load_dataset(g, &a.dataset)?;
    let m = &ds.geometry;
    let c = reference(g, m, &ds.trajectories)?;
    let options = KarcherOptions {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
    };
    let aligned = karcher_mean_trajectories(m, &ds.trajectories, &c, options)?;
    let unaligned = cross_sectional_summary(m, &ds.trajectories, &c)?;
    if !aligned.converged {
        log::warn!("Karcher mean stopped after {} passes without converging", aligned.energy_trace.len());
    }
    Dataset::single(m.clone(), "mean", aligned.mean.clone()).save(&dir.join("mean.json"))?;
    fs::write(dir.join("rho.csv"), write_rho_csv(&unaligned.rho(), &aligned.rho())?)?;
    fs::write(dir.join("warps.csv"), write_warps_csv(&ds.ids, &aligned.warps)?)?;
    fs::write(dir.join("ellipse.csv"), write_ellipse_csv(&aligned))?;
    fs::write(dir.join("ellipse_unaligned.csv"), write_ellipse_csv(&unaligned))?;
    let summary = pretty(&json!({
        "reference": m.encode_point(&c),
        "converged": aligned.converged,
        "energy_trace": aligned.energy_trace,
        "initial": aligned.initial.map(|i| ds.ids[i].clone()),
        "integrated_rho_unaligned": unaligned.integrated_rho(),
        "integrated_rho_aligned": aligned.integrated_rho(),
    }))?;
    fs::write(dir.join("summary.json"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn model_fit(g: &Global, a: &ModelFitArgs) -> Result<()> {
    let ds = load_dataset(g, &a.dataset)?;
    let m = &ds.geometry;
    let c = reference(g, m, &ds.trajectories)?;
    let summary = if a.no_align {
        cross_sectional_summary(m, &ds.trajectories, &c)?
    } else {
        karcher_mean_trajectories(m, &ds.trajectories, &c, KarcherOptions::default())?
    };
    emit(g, &fit_model(m, &summary, a.times)?.to_json()?)
}

fn model_sample(g: &Global, a: &ModelSampleArgs) -> Result<()> {
    let model = GaussianModel::load(&a.model)?;
    let trajectories = sample_many(&model, a.count, g.seed)?;
    let ds = Dataset {
        geometry: model.geometry.clone(),
        ids: (0..a.count).map(|i| format!("sample{i:04}")).collect(),
        labels: None,
        trajectories,
        notes: vec![format!("{} draws from a model, seed {}", a.count, g.seed)],
    };
    emit(g, &ds.to_json()?)
}

fn model_pvalue(g: &Global, a: &ModelPvalueArgs) -> Result<()> {
    let model = GaussianModel::load(&a.model)?;
    let mut ds = load_dataset(g, &a.dataset)?;
    if g.grid.is_none() && ds.grid_len() != model.source_len {
        ds = resample(ds, model.source_len)?;
    }
    let p = p_values(&model, &ds.trajectories, a.bootstrap, g.seed)?;
    let mut out = String::from("id,p_value\n");
    for (id, p) in ds.ids.iter().zip(p) {
        out.push_str(&format!("{id},{p}\n"));
    }
    emit(g, &out)
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let len = grid_len(g);
    let text = match a.kind {
        SimKind::WarpedCopies => warped_s2_dataset(a.count.unwrap_or(20), len, g.seed)?.to_json()?,
        SimKind::Vehicles => {
            if a.count.is_some() {
                return Err(CliError::Usage("the vehicle set has a fixed size of 14".into()));
            }
            vehicle_dataset(len, g.seed)?.to_json()?
        }
        SimKind::Contours => {
            let seqs = contour_sequences(4, a.count.unwrap_or(10), 80, g.samples, g.seed)?;
            write_contours_json(&seqs)? + "\n"
        }
        SimKind::Migration => write_geo_csv(&migration_tracks(a.count.unwrap_or(35), g.seed)),
        SimKind::Hurdat2 => hurdat2_text(a.count.unwrap_or(30), a.first_year, g.seed),
        SimKind::Warp => write_warp_csv(&synth_warp(g.seed, a.warp_kind, a.strength, len)?),
    };
    emit(g, &text)
}
