//! Tabular CSV exports. Every file starts with a header row.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::analysis::{DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::stats::KarcherSummary;
use crate::warp::{grid, Warp};

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Square matrix with an `id` column and one column per id.
pub fn write_matrix_csv(dm: &DistanceMatrix) -> String {
    let mut out = format!("id,{}\n", dm.ids.join(","));
    for (i, id) in dm.ids.iter().enumerate() {
        let _ = writeln!(out, "{id},{}", join(dm.values().row(i).iter().copied()));
    }
    out
}

/// Inverse of [`write_matrix_csv`].
pub fn read_matrix_csv(text: &str, source: &Path, metric: Metric) -> Result<DistanceMatrix> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_string).collect();
    let n = header.len();
    let mut ids = Vec::with_capacity(n);
    let mut values = DMatrix::zeros(n, n);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if i >= n || record.len() != n + 1 {
            return Err(Error::parse(source, line, format!("expected {n} rows of {} fields", n + 1)));
        }
        ids.push(record[0].to_string());
        for j in 0..n {
            values[(i, j)] = record[j + 1]
                .parse()
                .map_err(|_| Error::parse(source, line, format!("bad number {:?}", &record[j + 1])))?;
        }
    }
    if ids != header {
        return Err(Error::parse(source, 1, "row ids do not match the header"));
    }
    DistanceMatrix::new(metric, ids, values)
}

/// `t,gamma` rows.
pub fn write_warp_csv(warp: &Warp) -> String {
    let mut out = String::from("t,gamma\n");
    for (t, g) in grid(warp.len()).into_iter().zip(warp.values()) {
        let _ = writeln!(out, "{t},{g}");
    }
    out
}

/// `t` followed by one warp column per id.
pub fn write_warps_csv(ids: &[String], warps: &[Warp]) -> Result<String> {
    if ids.len() != warps.len() || warps.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} ids for {} warps", ids.len(), warps.len())));
    }
    let len = warps[0].len();
    if warps.iter().any(|w| w.len() != len) {
        return Err(Error::ShapeMismatch("warps of different lengths".into()));
    }
    let mut out = format!("t,{}\n", ids.join(","));
    for (i, t) in grid(len).into_iter().enumerate() {
        let _ = writeln!(out, "{t},{}", join(warps.iter().map(|w| w.values()[i])));
    }
    Ok(out)
}

/// `t,rho_unaligned,rho_aligned` rows.
pub fn write_rho_csv(unaligned: &[f64], aligned: &[f64]) -> Result<String> {
    if unaligned.len() != aligned.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} unaligned against {} aligned variances",
            unaligned.len(),
            aligned.len()
        )));
    }
    let mut out = String::from("t,rho_unaligned,rho_aligned\n");
    for ((t, u), a) in grid(unaligned.len()).into_iter().zip(unaligned).zip(aligned) {
        let _ = writeln!(out, "{t},{u},{a}");
    }
    Ok(out)
}

/// Per time: the mean point, the two leading singular values of `K̂(t)` and
/// the corresponding ambient tangent directions (zero when the rank is lower).
pub fn write_ellipse_csv(summary: &KarcherSummary) -> String {
    let dim = summary.mean.point(0).len();
    let names = |prefix: &str| (0..dim).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",");
    let mut out = format!("t,sigma1,sigma2,{},{},{}\n", names("mean"), names("u1_"), names("u2_"));
    for ((t, p), s) in summary.mean.times().into_iter().zip(summary.mean.points()).zip(&summary.sections) {
        let sv = |k: usize| s.singular_values.get(k).copied().unwrap_or(0.0);
        let dir = |k: usize| if k < s.dim() { s.mode_direction(k) } else { DVector::zeros(dim) };
        let _ = writeln!(
            out,
            "{t},{},{},{},{},{}",
            sv(0),
            sv(1),
            join(p.0.iter().copied()),
            join(dir(0).iter().copied()),
            join(dir(1).iter().copied())
        );
    }
    out
}

/// `id[,label],x1,...` rows of embedding coordinates.
pub fn write_mds_csv(ids: &[String], labels: Option<&[String]>, coords: &DMatrix<f64>) -> String {
    let axes: Vec<String> = (1..=coords.ncols()).map(|k| format!("x{k}")).collect();
    let mut out = match labels {
        Some(_) => format!("id,label,{}\n", axes.join(",")),
        None => format!("id,{}\n", axes.join(",")),
    };
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        let _ = writeln!(out, ",{}", join(coords.row(i).iter().copied()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 1.5, 2.0, 1.5, 0.0, 0.1, 2.0, 0.1, 0.0]);
        let dm = DistanceMatrix::new(Metric::Ds, vec!["a".into(), "b".into(), "c".into()], v).unwrap();
        let text = write_matrix_csv(&dm);
        assert!(text.starts_with("id,a,b,c\na,0,1.5,2\n"));
        let back = read_matrix_csv(&text, Path::new("m"), Metric::Ds).unwrap();
        assert_eq!(back, dm);
        assert!(read_matrix_csv("id,a,b\na,0,1\nc,1,0\n", Path::new("m"), Metric::Ds).is_err());
        assert!(matches!(
            read_matrix_csv("id,a,b\na,0,1\nb,x,0\n", Path::new("m"), Metric::Ds),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn warp_tables() {
        let w = Warp::identity(3);
        assert_eq!(write_warp_csv(&w), "t,gamma\n0,0\n0.5,0.5\n1,1\n");
        let text = write_warps_csv(&["a".into(), "b".into()], &[w.clone(), w]).unwrap();
        assert_eq!(text.lines().next(), Some("t,a,b"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(
            write_rho_csv(&[1.0, 2.0], &[0.5, 0.25]).unwrap(),
            "t,rho_unaligned,rho_aligned\n0,1,0.5\n1,2,0.25\n"
        );
    }

    #[test]
    fn mds_table() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.5]);
        let ids = vec!["p".to_string(), "q".to_string()];
        let labels = vec!["x".to_string(), "y".to_string()];
        assert_eq!(write_mds_csv(&ids, Some(&labels), &c), "id,label,x1,x2\np,x,1,0\nq,y,-1,0.5\n");
    }
}
