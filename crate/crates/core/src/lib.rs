//! Registration, comparison and statistics of time-warped trajectories on
//! Riemannian manifolds via transported square-root vector fields (TSRVFs).
//!
//! Geometries: the unit 2-sphere, SE(2) and the pre-shape sphere of planar
//! closed curves. See the README for the file formats and the CLI.

pub mod analysis;
pub mod error;
pub mod io;
pub mod manifold;
pub mod model;
pub mod reference;
pub mod registration;
pub mod stats;
pub mod synth;
pub mod tsrvf;
pub mod warp;

pub use error::{Error, Result};
pub use manifold::{Geometry, Manifold, ManifoldKind, Point, TangentVector};
pub use tsrvf::{Trajectory, Tsrvf};
pub use warp::Warp;
