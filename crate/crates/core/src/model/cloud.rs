use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ModelError, SensorId};

/// Upper bound (exclusive) on a point's offset from its scan start: one 10 Hz period.
pub const MAX_POINT_DT_NS: u32 = 100_000_000;

/// One LiDAR return. Matches the 24-byte on-disk point struct field for field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
    /// Offset from the cloud's `frame_timestamp`, nanoseconds.
    pub dt_ns: u32,
    pub channel: u16,
}

impl Point {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    pub fn with_position(mut self, p: &Vector3<f64>) -> Self {
        self.x = p.x as f32;
        self.y = p.y as f32;
        self.z = p.z as f32;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub sensor: SensorId,
    /// Scan start, nanoseconds since the Unix epoch (UTC).
    pub frame_timestamp: u64,
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(sensor: SensorId, frame_timestamp: u64, points: Vec<Point>) -> Result<Self, ModelError> {
        let cloud = Self {
            sensor,
            frame_timestamp,
            points,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(ModelError::InvalidPoint(i, "non-finite coordinate"));
            }
            if !(0.0..=1.0).contains(&p.intensity) {
                return Err(ModelError::InvalidPoint(i, "intensity outside [0, 1]"));
            }
            if p.dt_ns >= MAX_POINT_DT_NS {
                return Err(ModelError::InvalidPoint(i, "dt beyond one scan period"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(Point::position)
    }
}
