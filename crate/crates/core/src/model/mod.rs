//! Domain types shared by the codec, calibration, assembly and geometry code.

mod camera;
mod cloud;
mod frame;
mod ins;
mod meta;
mod sensor;
mod transform;

pub use camera::{CameraImage, CameraIntrinsics, ImageEncoding};
pub use cloud::{Point, PointCloud, MAX_POINT_DT_NS};
pub use frame::{Frame, SensorRecord};
pub use ins::{EgoMotionState, InsRecord};
pub use meta::{DatasetMeta, FormatVersion};
pub use sensor::{standard_registry, Agent, Modality, SensorId, SensorSpec};
pub use transform::{RigidTransform, REORTHONORMALIZE_THRESHOLD, ROTATION_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid sensor token {0:?}: expected an upper-case identifier")]
    InvalidSensorName(String),
    #[error("invalid sensor spec: {0}")]
    InvalidSensorSpec(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    PixelBufferLength { expected: usize, actual: usize },
    #[error("point {0}: {1}")]
    InvalidPoint(usize, &'static str),
    #[error("invalid INS record: {0}")]
    InvalidIns(String),
    #[error("ego-motion state must be finite")]
    InvalidMotion,
    #[error("invalid dataset meta: {0}")]
    InvalidMeta(String),
    #[error("registry violation: {0}")]
    RegistryViolation(String),
}

/// Serde adapter for `BTreeMap<SensorId, V>` as a list of `{sensor, value}`
/// entries, since JSON object keys must be strings.
pub(crate) mod sensor_map {
    use std::collections::BTreeMap;

    use serde::de::{Deserialize, Deserializer, Error};
    use serde::ser::{SerializeSeq, Serializer};
    use serde::Serialize;

    use super::SensorId;

    #[derive(Serialize)]
    struct EntryRef<'a, V> {
        sensor: &'a SensorId,
        value: &'a V,
    }

    #[derive(serde::Deserialize)]
    struct Entry<V> {
        sensor: SensorId,
        value: V,
    }

    pub fn serialize<S, V>(map: &BTreeMap<SensorId, V>, s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        V: Serialize,
    {
        let mut seq = s.serialize_seq(Some(map.len()))?;
        for (sensor, value) in map {
            seq.serialize_element(&EntryRef { sensor, value })?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D, V>(d: D) -> Result<BTreeMap<SensorId, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        let entries = Vec::<Entry<V>>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for e in entries {
            let key = e.sensor.to_string();
            if map.insert(e.sensor, e.value).is_some() {
                return Err(D::Error::custom(format!("duplicate entry for {key}")));
            }
        }
        Ok(map)
    }
}
