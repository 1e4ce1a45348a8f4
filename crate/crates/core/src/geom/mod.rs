//! Rectification, LiDAR-to-camera projection with depth colouring,
//! ego-motion deskewing and hidden point removal.

mod colormap;
mod deskew;
mod distortion;
mod hpr;
mod hull;
mod ppm;
mod project;
mod rectify;

pub use colormap::{colorize_depth, colorize_depth_range, depth_color, percentile, PURPLE, YELLOW};
pub use deskew::{deskew_point, ego_state_at, redistort_cloud, redistort_point, undistort_cloud};
pub use distortion::{distort_point, undistort_point, UNDISTORT_MAX_ITERATIONS, UNDISTORT_STEP_TOLERANCE};
pub use hpr::{hidden_point_removal, hidden_point_removal_points, spherical_flip, HprResult, Radius, AUTO_RADIUS_FACTOR};
pub use hull::{convex_hull_3d, Hull};
pub use ppm::{read_ppm, write_ppm};
pub use project::{draw_overlay, project_cloud, project_points, ProjectedPoint, MIN_DEPTH};
pub use rectify::{apply_map, rectification_map, PixelMap};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("undistortion did not converge within {UNDISTORT_MAX_ITERATIONS} iterations at ({0}, {1})")]
    NoConvergence(f64, f64),
    #[error("image is {actual:?} but the map expects {expected:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("colorize_depth needs at least one depth")]
    EmptyInput,
    #[error("time {t} lies outside the INS samples [{first}, {last}]")]
    OutOfRange { t: u64, first: u64, last: u64 },
    #[error("input is degenerate: {0}")]
    Degenerate(&'static str),
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} coincides with the viewpoint")]
    PointAtViewpoint(usize),
    #[error("radius {radius} must exceed the largest viewpoint distance {max_distance}")]
    InvalidRadius { radius: f64, max_distance: f64 },
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GeomError {
    pub fn code(&self) -> &'static str {
        match self {
            GeomError::NoConvergence(..) => "NO_CONVERGENCE",
            GeomError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            GeomError::EmptyInput => "EMPTY_INPUT",
            GeomError::OutOfRange { .. } => "OUT_OF_RANGE",
            GeomError::Degenerate(_) => "DEGENERATE",
            GeomError::TooFewPoints(_) => "TOO_FEW_POINTS",
            GeomError::PointAtViewpoint(_) => "POINT_AT_VIEWPOINT",
            GeomError::InvalidRadius { .. } => "INVALID_RADIUS",
            GeomError::Ppm(_) => "MALFORMED_PPM",
            GeomError::Io(_) => "IO_FAILURE",
        }
    }
}
