use nalgebra::Vector3;
use serde::Serialize;

use crate::model::{CameraIntrinsics, PointCloud, RigidTransform};

use super::distortion::distort_point;

/// Points closer than this to the image plane (camera-frame z, metres) are dropped.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, metres.
    pub depth: f64,
    pub source_index: usize,
}

/// Projects LiDAR points into a camera image.
///
/// `cam_from_lidar` maps LiDAR coordinates into the camera frame, e.g.
/// `graph.transform_between(camera, lidar)`. Points at or behind
/// [`MIN_DEPTH`] and points falling outside `[0, width) × [0, height)` are
/// dropped. With `apply_distortion`, normalized coordinates pass through the
/// lens model before the pinhole step, matching raw (unrectified) images.
pub fn project_cloud(
    cloud: &PointCloud,
    cam_from_lidar: &RigidTransform,
    intr: &CameraIntrinsics,
    apply_distortion: bool,
) -> Vec<ProjectedPoint> {
    project_iter(cloud.positions(), cam_from_lidar, intr, apply_distortion)
}

/// [`project_cloud`] over plain positions.
pub fn project_points(
    points: &[Vector3<f64>],
    cam_from_lidar: &RigidTransform,
    intr: &CameraIntrinsics,
    apply_distortion: bool,
) -> Vec<ProjectedPoint> {
    project_iter(points.iter().copied(), cam_from_lidar, intr, apply_distortion)
}

fn project_iter(
    points: impl Iterator<Item = Vector3<f64>>,
    cam_from_lidar: &RigidTransform,
    intr: &CameraIntrinsics,
    apply_distortion: bool,
) -> Vec<ProjectedPoint> {
    let (w, h) = (intr.width as f64, intr.height as f64);
    points
        .enumerate()
        .filter_map(|(i, p)| {
            let pc = cam_from_lidar.apply(&p);
            if pc.z <= MIN_DEPTH {
                return None;
            }
            let mut n = [pc.x / pc.z, pc.y / pc.z];
            if apply_distortion {
                n = distort_point(intr, n);
            }
            let u = intr.fx * n[0] + intr.cx;
            let v = intr.fy * n[1] + intr.cy;
            (u >= 0.0 && u < w && v >= 0.0 && v < h).then_some(ProjectedPoint {
                u,
                v,
                depth: pc.z,
                source_index: i,
            })
        })
        .collect()
}

/// Paints `colors[i]` as a `(2·radius+1)²` square at each projected point onto
/// an RGB buffer of `width × height`. Farther points are drawn first so near
/// ones stay on top.
pub fn draw_overlay(
    rgb: &mut [u8],
    width: u32,
    height: u32,
    points: &[ProjectedPoint],
    colors: &[[u8; 3]],
    radius: u32,
) {
    assert_eq!(rgb.len(), width as usize * height as usize * 3, "RGB buffer size");
    assert_eq!(points.len(), colors.len(), "one colour per point");
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].depth.total_cmp(&points[a].depth));
    let r = radius as i64;
    for i in order {
        let (cu, cv) = (points[i].u as i64, points[i].v as i64);
        for y in (cv - r).max(0)..=(cv + r).min(height as i64 - 1) {
            for x in (cu - r).max(0)..=(cu + r).min(width as i64 - 1) {
                let at = (y as usize * width as usize + x as usize) * 3;
                rgb[at..at + 3].copy_from_slice(&colors[i]);
            }
        }
    }
}
