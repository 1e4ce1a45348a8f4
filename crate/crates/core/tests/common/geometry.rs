//! Brute-force geometric oracles.

use std::collections::HashSet;

use fmse_core::assemble::TriggerModel;
use fmse_core::model::{CameraIntrinsics, RigidTransform};
use nalgebra::{Matrix4, Vector3, Vector4};
use rand::Rng;
use robust::{orient3d, Coord3D};

/// Homogeneous matrix assembled element by element.
pub fn homogeneous(t: &RigidTransform) -> Matrix4<f64> {
    let r = t.rotation();
    let p = t.translation();
    let mut m = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = r[(i, j)];
        }
        m[(i, 3)] = p[i];
    }
    m[(3, 3)] = 1.0;
    m
}

/// `T_B · T_C⁻¹` with a general (LU) matrix inverse.
pub fn between_oracle(tb: &RigidTransform, tc: &RigidTransform) -> Matrix4<f64> {
    homogeneous(tb) * homogeneous(tc).try_inverse().expect("rigid transforms are invertible")
}

pub fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn random_transform<R: Rng>(rng: &mut R, max_translation: f64) -> RigidTransform {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-6 { Vector3::z() } else { axis.normalize() };
    let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let t = Vector3::new(
        rng.gen_range(-max_translation..max_translation),
        rng.gen_range(-max_translation..max_translation),
        rng.gen_range(-max_translation..max_translation),
    );
    RigidTransform::from_axis_angle(axis * angle, t)
}

/// Per-point projection: homogeneous multiply, then `K·p` and divide by depth.
/// Returns `(index, u, v, depth)` for points in front of the camera and
/// inside the image.
pub fn project_oracle(points: &[Vector3<f64>], cam_from_lidar: &Matrix4<f64>, k: &CameraIntrinsics) -> Vec<(usize, f64, f64, f64)> {
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let c = cam_from_lidar * Vector4::new(p.x, p.y, p.z, 1.0);
        if c.z <= 1e-6 {
            continue;
        }
        let u = (k.fx * c.x + k.cx * c.z) / c.z;
        let v = (k.fy * c.y + k.cy * c.z) / c.z;
        if u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64 {
            out.push((i, u, v, c.z));
        }
    }
    out
}

fn c3(p: &Vector3<f64>) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Extreme points of a full-dimensional set by exhaustive facet enumeration:
/// every triple whose plane has all points on one side is a supporting
/// plane; a point is a vertex when it lies on at least three distinct
/// supporting planes. O(n⁴).
pub fn hull_vertices_oracle(points: &[Vector3<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut planes: HashSet<Vec<u64>> = HashSet::new();
    let words = n.div_ceil(64);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (c3(&points[i]), c3(&points[j]), c3(&points[k]));
                let mut pos = false;
                let mut neg = false;
                let mut on = vec![0u64; words];
                let mut supporting = true;
                for (m, p) in points.iter().enumerate() {
                    let s = orient3d(a, b, c, c3(p));
                    if s > 0.0 {
                        pos = true;
                    } else if s < 0.0 {
                        neg = true;
                    } else {
                        on[m / 64] |= 1 << (m % 64);
                    }
                    if pos && neg {
                        supporting = false;
                        break;
                    }
                }
                // a degenerate (collinear) triple has every point "on" it
                let on_count: u32 = on.iter().map(|w| w.count_ones()).sum();
                if supporting && (pos || neg) && on_count as usize != n {
                    planes.insert(on);
                }
            }
        }
    }
    (0..n)
        .filter(|&m| planes.iter().filter(|on| on[m / 64] >> (m % 64) & 1 == 1).count() >= 3)
        .collect()
}

/// Spherical flip as written: `p + 2(R − ‖p − c‖)·(p − c)/‖p − c‖`.
pub fn flip_oracle(p: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Vector3<f64> {
    let d = p - c;
    let n = d.norm();
    p + (d / n) * (2.0 * (r - n))
}

/// Visible indices: flipped points that are hull vertices of the flipped
/// set together with the viewpoint.
pub fn hpr_oracle(points: &[Vector3<f64>], c: &Vector3<f64>, r: f64) -> Vec<usize> {
    let mut flipped: Vec<_> = points.iter().map(|p| flip_oracle(p, c, r)).collect();
    flipped.push(*c);
    hull_vertices_oracle(&flipped)
        .into_iter()
        .filter(|&i| i < points.len())
        .collect()
}

/// Nearest trigger by scanning candidate indices; ties go to the earlier one.
pub fn nearest_trigger_oracle(t: u64, trigger: &TriggerModel) -> (u64, i64) {
    let approx = t.saturating_sub(trigger.phase_ns) / trigger.period_ns;
    let mut best: Option<(u64, i64)> = None;
    for k in approx.saturating_sub(2)..=approx + 2 {
        let tk = trigger.phase_ns + k * trigger.period_ns;
        let d = t as i64 - tk as i64;
        if best.is_none_or(|(_, bd)| d.unsigned_abs() < bd.unsigned_abs()) {
            best = Some((k, d));
        }
    }
    best.unwrap()
}
