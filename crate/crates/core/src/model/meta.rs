use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Agent, CameraIntrinsics, Frame, Modality, ModelError, RigidTransform, SensorId, SensorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FormatVersion {
    pub major: u16,
    pub minor: u16,
}

impl FormatVersion {
    pub const CURRENT: FormatVersion = FormatVersion { major: 1, minor: 0 };

    pub const fn new(major: u16, minor: u16) -> Self {
        Self { major, minor }
    }
}

impl Default for FormatVersion {
    fn default() -> Self {
        Self::CURRENT
    }
}

impl fmt::Display for FormatVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.major, self.minor)
    }
}

/// Everything a reader needs before the first frame: registry, intrinsics and
/// the sensor-to-root calibration of each agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: FormatVersion,
    pub data_drop_id: String,
    pub agents: Vec<Agent>,
    pub sensor_registry: Vec<SensorSpec>,
    #[serde(with = "super::sensor_map")]
    pub intrinsics: BTreeMap<SensorId, CameraIntrinsics>,
    #[serde(with = "super::sensor_map")]
    pub calibration: BTreeMap<SensorId, RigidTransform>,
    /// Nanoseconds since the Unix epoch, UTC.
    pub creation_time: u64,
}

impl DatasetMeta {
    /// Registry position of `sensor`, which is its on-disk id.
    pub fn sensor_index(&self, sensor: &SensorId) -> Option<u16> {
        self.sensor_registry
            .iter()
            .position(|s| &s.id == sensor)
            .map(|i| i as u16)
    }

    pub fn sensor_at(&self, index: u16) -> Option<&SensorId> {
        self.sensor_registry.get(index as usize).map(|s| &s.id)
    }

    pub fn spec(&self, sensor: &SensorId) -> Option<&SensorSpec> {
        self.sensor_registry.iter().find(|s| &s.id == sensor)
    }

    /// Sensors whose token is `name`, across all agents.
    pub fn find_by_name(&self, name: &str) -> Vec<&SensorId> {
        self.sensor_registry
            .iter()
            .map(|s| &s.id)
            .filter(|id| id.name == name)
            .collect()
    }

    pub fn root_of(&self, agent: Agent) -> Option<&SensorId> {
        self.sensor_registry
            .iter()
            .map(|s| &s.id)
            .find(|id| id.agent == agent && id.is_root())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidMeta(msg));
        if self.sensor_registry.len() > u16::MAX as usize {
            return bad("registry exceeds 65535 sensors".into());
        }
        let agents: BTreeSet<Agent> = self.agents.iter().copied().collect();
        if agents.len() != self.agents.len() {
            return bad("duplicate agent".into());
        }
        let mut keys = BTreeSet::new();
        for spec in &self.sensor_registry {
            spec.validate()?;
            if !keys.insert(spec.id.key()) {
                return bad(format!("duplicate registry entry {}", spec.id));
            }
            if !agents.contains(&spec.id.agent) {
                return bad(format!("{} belongs to an undeclared agent", spec.id));
            }
        }
        for (id, k) in &self.intrinsics {
            if self.spec(id).is_none() {
                return bad(format!("intrinsics for unregistered sensor {id}"));
            }
            if id.modality != Modality::Camera {
                return bad(format!("intrinsics for non-camera sensor {id}"));
            }
            k.validate()?;
        }
        for id in self.calibration.keys() {
            if self.spec(id).is_none() {
                return bad(format!("calibration for unregistered sensor {id}"));
            }
        }
        for &agent in &self.agents {
            let Some(root) = self.root_of(agent) else {
                return bad(format!("agent {agent} has no {} in the registry", agent.root_name()));
            };
            match self.calibration.get(root) {
                Some(t) if t.is_identity(1e-9) => {}
                Some(_) => return bad(format!("root {root} must map to identity")),
                None => return bad(format!("calibration lacks root {root}")),
            }
        }
        Ok(())
    }

    /// Checks that every record in `frame` belongs to a registered sensor and
    /// carries the payload kind of that sensor's modality.
    pub fn check_frame(&self, frame: &Frame) -> Result<(), ModelError> {
        for id in frame.records.keys().chain(frame.missing.iter()) {
            if self.sensor_index(id).is_none() {
                return Err(ModelError::RegistryViolation(format!(
                    "frame {} references unregistered sensor {id}",
                    frame.index
                )));
            }
        }
        frame.validate()
    }
}
