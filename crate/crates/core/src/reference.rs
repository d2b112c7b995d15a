//! Choice of the TSRVF reference point `c`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::manifold::{Geometry, Manifold, Point};
use crate::stats::karcher_mean_points;
use crate::tsrvf::Trajectory;

/// How the reference point is chosen for a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RefPoint {
    /// Given coordinates, in the geometry's interchange encoding flattened
    /// (`x,y,z` on S², `theta,x,y` on SE(2), `qx1,qy1,...` on the q-sphere).
    Fixed(Vec<f64>),
    /// Karcher mean of the trajectories' start points.
    StartMean,
    /// North pole, identity, or the unit circle's q-function.
    #[default]
    Default,
}

impl FromStr for RefPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(RefPoint::Default),
            "start-mean" => Ok(RefPoint::StartMean),
            _ => {
                let coords = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown reference point {s:?}")))?;
                let values = coords
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::InvalidArgument(format!("bad reference coordinates {coords:?}: {e}")))?;
                Ok(RefPoint::Fixed(values))
            }
        }
    }
}

impl fmt::Display for RefPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefPoint::Default => f.write_str("default"),
            RefPoint::StartMean => f.write_str("start-mean"),
            RefPoint::Fixed(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
        }
    }
}

impl RefPoint {
    pub fn resolve(&self, geometry: &Geometry, trajs: &[Trajectory]) -> Result<Point> {
        match self {
            RefPoint::Default => Ok(geometry.default_reference()),
            RefPoint::StartMean => {
                let starts: Vec<Point> = trajs.iter().map(|a| a.start().clone()).collect();
                karcher_mean_points(geometry, &starts)
            }
            RefPoint::Fixed(v) => {
                let value = match geometry {
                    Geometry::QSphere(_) => {
                        if v.len() % 2 != 0 {
                            return Err(Error::InvalidPoint("odd number of q-sphere coordinates".into()));
                        }
                        serde_json::Value::Array(v.chunks(2).map(|c| serde_json::json!([c[0], c[1]])).collect())
                    }
                    _ => serde_json::json!(v),
                };
                geometry.decode_point(&value)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("default".parse::<RefPoint>().unwrap(), RefPoint::Default);
        assert_eq!("start-mean".parse::<RefPoint>().unwrap(), RefPoint::StartMean);
        let r: RefPoint = "fixed:0,0,1".parse().unwrap();
        assert_eq!(r, RefPoint::Fixed(vec![0.0, 0.0, 1.0]));
        assert_eq!(r.to_string().parse::<RefPoint>().unwrap(), r);
        assert!("fixed:a,b".parse::<RefPoint>().is_err());
        assert!("north".parse::<RefPoint>().is_err());
    }

    #[test]
    fn resolution() {
        let g = Geometry::s2();
        let a = Trajectory::new(&g, vec![Point::from_slice(&[1.0, 0.0, 0.0]); 3]).unwrap();
        let b = Trajectory::new(&g, vec![Point::from_slice(&[0.0, 1.0, 0.0]); 3]).unwrap();
        let mid = RefPoint::StartMean.resolve(&g, &[a.clone(), b]).unwrap();
        assert!((mid.0[0] - mid.0[1]).abs() < 1e-8);
        assert_eq!(RefPoint::Default.resolve(&g, std::slice::from_ref(&a)).unwrap(), Point::from_slice(&[0.0, 0.0, 1.0]));
        assert!(RefPoint::Fixed(vec![0.0, 0.0, 2.0]).resolve(&g, &[a]).is_err());
    }
}
