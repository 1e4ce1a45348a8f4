use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ModelError, RigidTransform};

/// One INS/GNSS solution.
///
/// `orientation` is the body-to-world rotation as a unit quaternion in
/// `[x, y, z, w]` order; velocity and angular rate are expressed in the body
/// frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsRecord {
    pub timestamp: u64,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
    pub orientation: [f64; 4],
    pub velocity: [f64; 3],
    pub angular_rate: [f64; 3],
}

impl InsRecord {
    /// A stationary record at the given position with identity orientation.
    pub fn at_rest(timestamp: u64, latitude: f64, longitude: f64, altitude: f64) -> Self {
        Self {
            timestamp,
            latitude,
            longitude,
            altitude,
            orientation: [0.0, 0.0, 0.0, 1.0],
            velocity: [0.0; 3],
            angular_rate: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let q = self.orientation;
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if (norm - 1.0).abs() > 1e-9 || norm.is_nan() {
            return Err(ModelError::InvalidIns(format!("quaternion norm {norm}")));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(ModelError::InvalidIns(format!("latitude {}", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(ModelError::InvalidIns(format!("longitude {}", self.longitude)));
        }
        let finite = self.altitude.is_finite()
            && self.velocity.iter().chain(&self.angular_rate).all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidIns("non-finite value".into()));
        }
        Ok(())
    }
}

/// Constant twist assumed over one scan, in the sensor frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EgoMotionState {
    /// m/s
    pub linear_velocity: Vector3<f64>,
    /// rad/s
    pub angular_velocity: Vector3<f64>,
}

impl EgoMotionState {
    pub fn new(linear_velocity: Vector3<f64>, angular_velocity: Vector3<f64>) -> Result<Self, ModelError> {
        let s = Self {
            linear_velocity,
            angular_velocity,
        };
        if s.linear_velocity.iter().chain(s.angular_velocity.iter()).all(|v| v.is_finite()) {
            Ok(s)
        } else {
            Err(ModelError::InvalidMotion)
        }
    }

    pub fn stationary() -> Self {
        Self::default()
    }

    /// The same rigid-body motion seen from another frame mounted on the body.
    ///
    /// `target_from_body` maps body coordinates into the target frame. The
    /// target origin picks up the lever-arm velocity `ω × r`.
    pub fn expressed_in(&self, target_from_body: &RigidTransform) -> Self {
        let body_from_target = target_from_body.inverse();
        let lever = body_from_target.translation();
        let v_body = self.linear_velocity + self.angular_velocity.cross(lever);
        Self {
            linear_velocity: target_from_body.rotate(&v_body),
            angular_velocity: target_from_body.rotate(&self.angular_velocity),
        }
    }
}
