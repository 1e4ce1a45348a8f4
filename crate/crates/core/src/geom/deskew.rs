use nalgebra::{Rotation3, Vector3};

use crate::model::{EgoMotionState, InsRecord, PointCloud};

use super::GeomError;

/// Carries a point measured `dt_s` seconds after scan start back into the
/// scan-start sensor pose: `p′ = R(ω·dt)·p + v·dt`, with `R` the exact
/// angle-axis rotation.
pub fn deskew_point(p: &Vector3<f64>, motion: &EgoMotionState, dt_s: f64) -> Vector3<f64> {
    Rotation3::new(motion.angular_velocity * dt_s) * p + motion.linear_velocity * dt_s
}

/// Exact inverse of [`deskew_point`]: `p = R(ω·dt)ᵀ·(p′ − v·dt)`.
pub fn redistort_point(p: &Vector3<f64>, motion: &EgoMotionState, dt_s: f64) -> Vector3<f64> {
    Rotation3::new(motion.angular_velocity * dt_s).inverse() * (p - motion.linear_velocity * dt_s)
}

fn map_cloud(cloud: &PointCloud, f: impl Fn(&Vector3<f64>, f64) -> Vector3<f64>) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|pt| pt.with_position(&f(&pt.position(), pt.dt_ns as f64 * 1e-9)))
        .collect();
    PointCloud {
        sensor: cloud.sensor.clone(),
        frame_timestamp: cloud.frame_timestamp,
        points,
    }
}

/// Deskews every point to the scan-start pose using its own `dt_ns`.
/// Per-point `dt_ns`, intensity and channel are kept.
pub fn undistort_cloud(cloud: &PointCloud, motion: &EgoMotionState) -> PointCloud {
    map_cloud(cloud, |p, dt| deskew_point(p, motion, dt))
}

/// Inverse of [`undistort_cloud`] under the same motion.
pub fn redistort_cloud(cloud: &PointCloud, motion: &EgoMotionState) -> PointCloud {
    map_cloud(cloud, |p, dt| redistort_point(p, motion, dt))
}

/// Linear interpolation of velocity and angular rate between the two INS
/// samples bracketing `t`. `ins` must be sorted by timestamp.
pub fn ego_state_at(ins: &[InsRecord], t: u64) -> Result<EgoMotionState, GeomError> {
    let (first, last) = match (ins.first(), ins.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(GeomError::EmptyInput),
    };
    if t < first || t > last {
        return Err(GeomError::OutOfRange { t, first, last });
    }
    let state = |r: &InsRecord| EgoMotionState {
        linear_velocity: Vector3::from(r.velocity),
        angular_velocity: Vector3::from(r.angular_rate),
    };
    let hi = ins.partition_point(|r| r.timestamp < t);
    let b = &ins[hi];
    if b.timestamp == t || hi == 0 {
        return Ok(state(b));
    }
    let a = &ins[hi - 1];
    let w = (t - a.timestamp) as f64 / (b.timestamp - a.timestamp) as f64;
    let (sa, sb) = (state(a), state(b));
    Ok(EgoMotionState {
        linear_velocity: sa.linear_velocity * (1.0 - w) + sb.linear_velocity * w,
        angular_velocity: sa.angular_velocity * (1.0 - w) + sb.angular_velocity * w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn m(v: [f64; 3], w: [f64; 3]) -> EgoMotionState {
        EgoMotionState::new(Vector3::from(v), Vector3::from(w)).unwrap()
    }

    #[test]
    fn closed_forms() {
        let p = Vector3::new(20.0, 0.0, 0.0);
        assert_eq!(deskew_point(&p, &EgoMotionState::stationary(), 0.07), p);
        let t = deskew_point(&p, &m([10.0, 0.0, 0.0], [0.0; 3]), 0.05);
        assert!((t - Vector3::new(20.5, 0.0, 0.0)).norm() < 1e-12);
        let r = deskew_point(&Vector3::x(), &m([0.0; 3], [0.0, 0.0, PI]), 0.5);
        assert!((r - Vector3::y()).norm() < 1e-9);
    }

    #[test]
    fn redistort_inverts() {
        let motion = m([12.0, -3.0, 0.4], [0.2, -0.1, 1.3]);
        let p = Vector3::new(-7.5, 31.0, 2.2);
        for dt in [0.0, 0.013, 0.0999] {
            let back = redistort_point(&deskew_point(&p, &motion, dt), &motion, dt);
            assert!((back - p).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let mut a = InsRecord::at_rest(1_000, 0.0, 0.0, 0.0);
        a.velocity = [1.0, 2.0, 3.0];
        a.angular_rate = [0.0, 0.0, 0.5];
        let mut b = InsRecord::at_rest(2_000, 0.0, 0.0, 0.0);
        b.velocity = [3.0, 2.0, -1.0];
        b.angular_rate = [0.0, 0.0, 1.5];
        let ins = [a, b];
        let exact = ego_state_at(&ins, 2_000).unwrap();
        assert_eq!(exact.linear_velocity, Vector3::new(3.0, 2.0, -1.0));
        let mid = ego_state_at(&ins, 1_500).unwrap();
        assert_eq!(mid.linear_velocity, Vector3::new(2.0, 2.0, 1.0));
        assert_eq!(mid.angular_velocity, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(ego_state_at(&ins, 999).unwrap_err().code(), "OUT_OF_RANGE");
        assert_eq!(ego_state_at(&ins, 2_001).unwrap_err().code(), "OUT_OF_RANGE");
        assert_eq!(ego_state_at(&[], 0).unwrap_err().code(), "EMPTY_INPUT");
    }
}
