//! Per-agent extrinsics and sensor-pair transforms.
//!
//! Each entry `T_X` maps coordinates in the agent's root frame (its TOP
//! LiDAR) into the frame of sensor `X`. The transform between two sensors is
//! then `T_BC = T_B · T_C⁻¹`, which maps points from `C` into `B`. To project
//! LiDAR points into a camera, use `transform_between(camera, lidar)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::canonical_json;
use crate::model::{Agent, DatasetMeta, Modality, RigidTransform, SensorId};

/// Tolerance for "root maps to identity".
pub const ROOT_IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("root sensor {0} must map to identity")]
    NonIdentityRoot(SensorId),
    #[error("sensor {0} is not registered")]
    UnregisteredSensor(SensorId),
    #[error("{from} and {to} belong to different agents; cross-agent registration is not modelled")]
    CrossAgent { from: SensorId, to: SensorId },
    #[error("calibration lacks the root sensor of agent {0}")]
    MissingRoot(Agent),
    #[error("invalid calibration document: {0}")]
    InvalidDocument(String),
}

impl CalibError {
    pub fn code(&self) -> &'static str {
        match self {
            CalibError::NonIdentityRoot(_) => "NON_IDENTITY_ROOT",
            CalibError::UnregisteredSensor(_) => "UNREGISTERED_SENSOR",
            CalibError::CrossAgent { .. } => "CROSS_AGENT",
            CalibError::MissingRoot(_) => "MISSING_ROOT",
            CalibError::InvalidDocument(_) => "INVALID_DOCUMENT",
        }
    }
}

/// Outcome of a registration.
#[derive(Clone, Debug, PartialEq)]
pub enum Registration {
    Inserted,
    Replaced { previous: RigidTransform },
}

/// Log line emitted when a registration overwrites an existing entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplacementNotice {
    pub sensor: SensorId,
    /// Largest absolute element change of the 4×4 matrix.
    pub max_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// Largest ‖T_BD − T_BC·T_CD‖∞ over all same-agent triples.
    pub max_residual: f64,
    pub triples_checked: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CalibrationGraph {
    entries: BTreeMap<SensorId, RigidTransform>,
    /// Root of each agent; agents not listed use their TOP LiDAR.
    roots: BTreeMap<Agent, SensorId>,
    /// When set, only these sensors may be registered.
    registry: Option<BTreeSet<SensorId>>,
    change_log: Vec<ReplacementNotice>,
}

impl CalibrationGraph {
    /// An empty graph that accepts any sensor.
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty graph restricted to the sensors of `registry`.
    pub fn with_registry(registry: impl IntoIterator<Item = SensorId>) -> Self {
        Self {
            registry: Some(registry.into_iter().collect()),
            ..Self::default()
        }
    }

    pub fn root(&self, agent: Agent) -> SensorId {
        self.roots.get(&agent).cloned().unwrap_or_else(|| {
            SensorId::new(agent, agent.root_name(), Modality::Lidar).expect("static root token")
        })
    }

    pub fn is_root(&self, sensor: &SensorId) -> bool {
        self.root(sensor.agent) == *sensor
    }

    /// Inserts or overwrites the root-to-sensor transform of `sensor`.
    /// Overwrites append a [`ReplacementNotice`] to the change log.
    pub fn register(&mut self, sensor: SensorId, to_sensor: RigidTransform) -> Result<Registration, CalibError> {
        if let Some(reg) = &self.registry {
            if !reg.contains(&sensor) {
                return Err(CalibError::UnregisteredSensor(sensor));
            }
        }
        if self.is_root(&sensor) && !to_sensor.is_identity(ROOT_IDENTITY_TOLERANCE) {
            return Err(CalibError::NonIdentityRoot(sensor));
        }
        match self.entries.insert(sensor.clone(), to_sensor) {
            None => Ok(Registration::Inserted),
            Some(previous) => {
                self.change_log.push(ReplacementNotice {
                    sensor,
                    max_change: previous.max_abs_diff(&to_sensor),
                });
                Ok(Registration::Replaced { previous })
            }
        }
    }

    pub fn get(&self, sensor: &SensorId) -> Option<&RigidTransform> {
        self.entries.get(sensor)
    }

    pub fn sensors(&self) -> impl Iterator<Item = &SensorId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn change_log(&self) -> &[ReplacementNotice] {
        &self.change_log
    }

    /// `T_BC = T_B · T_C⁻¹`: maps points from sensor `to` (C) into sensor `from` (B).
    pub fn transform_between(&self, from: &SensorId, to: &SensorId) -> Result<RigidTransform, CalibError> {
        let tb = self.lookup(from)?;
        let tc = self.lookup(to)?;
        if from.agent != to.agent {
            return Err(CalibError::CrossAgent {
                from: from.clone(),
                to: to.clone(),
            });
        }
        Ok(tb.compose(&tc.inverse()))
    }

    fn lookup(&self, sensor: &SensorId) -> Result<&RigidTransform, CalibError> {
        self.entries
            .get(sensor)
            .ok_or_else(|| CalibError::UnregisteredSensor(sensor.clone()))
    }

    /// Checks `T_BD = T_BC · T_CD` over every ordered same-agent triple.
    pub fn consistency_check(&self) -> ConsistencyReport {
        let mut max_residual = 0.0f64;
        let mut triples_checked = 0;
        let mut by_agent: BTreeMap<Agent, Vec<&SensorId>> = BTreeMap::new();
        for id in self.entries.keys() {
            by_agent.entry(id.agent).or_default().push(id);
        }
        for ids in by_agent.values() {
            let pair: BTreeMap<(usize, usize), RigidTransform> = (0..ids.len())
                .flat_map(|i| (0..ids.len()).map(move |j| (i, j)))
                .map(|(i, j)| ((i, j), self.transform_between(ids[i], ids[j]).expect("same agent")))
                .collect();
            for b in 0..ids.len() {
                for c in 0..ids.len() {
                    for d in 0..ids.len() {
                        let chained = pair[&(b, c)].compose(&pair[&(c, d)]);
                        max_residual = max_residual.max(pair[&(b, d)].max_abs_diff(&chained));
                        triples_checked += 1;
                    }
                }
            }
        }
        ConsistencyReport {
            max_residual,
            triples_checked,
        }
    }

    /// The same graph expressed relative to `new_root`: every entry of its
    /// agent becomes `T_X · T_R⁻¹`. Pairwise transforms are unchanged.
    pub fn rerooted(&self, new_root: &SensorId) -> Result<CalibrationGraph, CalibError> {
        let to_root = self.lookup(new_root)?.inverse();
        let mut out = self.clone();
        out.change_log.clear();
        for (id, t) in out.entries.iter_mut() {
            if id.agent == new_root.agent {
                *t = if id == new_root {
                    RigidTransform::identity()
                } else {
                    t.compose(&to_root)
                };
            }
        }
        out.roots.insert(new_root.agent, new_root.clone());
        Ok(out)
    }

    /// Builds the graph from a dataset's calibration block.
    pub fn load_from_meta(meta: &DatasetMeta) -> Result<CalibrationGraph, CalibError> {
        let mut g = Self::with_registry(meta.sensor_registry.iter().map(|s| s.id.clone()));
        for &agent in &meta.agents {
            let root = g.root(agent);
            if !meta.calibration.contains_key(&root) {
                return Err(CalibError::MissingRoot(agent));
            }
        }
        for (id, t) in &meta.calibration {
            g.register(id.clone(), *t)?;
        }
        Ok(g)
    }

    /// The calibration block for a dataset meta.
    pub fn save_to_meta(&self) -> BTreeMap<SensorId, RigidTransform> {
        self.entries.clone()
    }

    /// Standalone canonical-JSON calibration document.
    pub fn to_json(&self) -> Vec<u8> {
        let doc = CalibrationDocument {
            format: DOCUMENT_FORMAT.into(),
            roots: self.roots.values().cloned().collect(),
            entries: self.entries.clone(),
        };
        canonical_json(&doc).expect("calibration serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<CalibrationGraph, CalibError> {
        let doc: CalibrationDocument =
            serde_json::from_slice(bytes).map_err(|e| CalibError::InvalidDocument(e.to_string()))?;
        if doc.format != DOCUMENT_FORMAT {
            return Err(CalibError::InvalidDocument(format!("unknown format {:?}", doc.format)));
        }
        let mut g = Self::new();
        for root in doc.roots {
            g.roots.insert(root.agent, root);
        }
        for (id, t) in doc.entries {
            g.register(id, t)?;
        }
        Ok(g)
    }
}

const DOCUMENT_FORMAT: &str = "4mse-calibration/1";

#[derive(Serialize, Deserialize)]
struct CalibrationDocument {
    format: String,
    #[serde(default)]
    roots: Vec<SensorId>,
    #[serde(with = "crate::model::sensor_map")]
    entries: BTreeMap<SensorId, RigidTransform>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn id(name: &str, modality: Modality) -> SensorId {
        SensorId::new(Agent::Vehicle, name, modality).unwrap()
    }

    #[test]
    fn root_must_be_identity() {
        let mut g = CalibrationGraph::new();
        let root = id("LIDAR_TOP", Modality::Lidar);
        assert_eq!(g.register(root.clone(), RigidTransform::identity()).unwrap(), Registration::Inserted);
        let moved = RigidTransform::from_translation(Vector3::new(0.1, 0.0, 0.0));
        assert_eq!(g.register(root, moved).unwrap_err().code(), "NON_IDENTITY_ROOT");
    }

    #[test]
    fn storage_round_trip_and_replacement_log() {
        let mut g = CalibrationGraph::new();
        let cam = id("FRONT_LEFT", Modality::Camera);
        let t = RigidTransform::from_axis_angle(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        g.register(cam.clone(), t).unwrap();
        assert_eq!(g.get(&cam), Some(&t));
        let r = g.register(cam.clone(), RigidTransform::identity()).unwrap();
        assert_eq!(r, Registration::Replaced { previous: t });
        assert_eq!(g.change_log().len(), 1);
        assert_eq!(g.change_log()[0].sensor, cam);
    }

    #[test]
    fn self_pair_and_root_pair() {
        let mut g = CalibrationGraph::new();
        let root = id("LIDAR_TOP", Modality::Lidar);
        let cam = id("FRONT_LEFT", Modality::Camera);
        let t = RigidTransform::from_axis_angle(Vector3::new(0.4, -0.2, 1.3), Vector3::new(0.5, -2.0, 0.1));
        g.register(root.clone(), RigidTransform::identity()).unwrap();
        g.register(cam.clone(), t).unwrap();
        assert!(g.transform_between(&cam, &cam).unwrap().is_identity(1e-12));
        assert!(g.transform_between(&cam, &root).unwrap().max_abs_diff(&t) < 1e-15);
        assert!(g.consistency_check().max_residual < 1e-12);
    }

    #[test]
    fn errors() {
        let mut g = CalibrationGraph::with_registry([id("LIDAR_TOP", Modality::Lidar)]);
        let cam = id("FRONT_LEFT", Modality::Camera);
        assert_eq!(g.register(cam.clone(), RigidTransform::identity()).unwrap_err().code(), "UNREGISTERED_SENSOR");
        let mut g = CalibrationGraph::new();
        let tower = SensorId::new(Agent::Tower, "TOWER_CAM_1", Modality::Camera).unwrap();
        g.register(cam.clone(), RigidTransform::identity()).unwrap();
        g.register(tower.clone(), RigidTransform::identity()).unwrap();
        assert_eq!(g.transform_between(&cam, &tower).unwrap_err().code(), "CROSS_AGENT");
    }

    #[test]
    fn meta_round_trip_and_missing_root() {
        let meta = crate::fixtures::meta();
        let g = CalibrationGraph::load_from_meta(&meta).unwrap();
        assert_eq!(g.save_to_meta(), meta.calibration);
        let back = CalibrationGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.save_to_meta(), meta.calibration);

        let mut broken = meta.clone();
        let root = broken.root_of(Agent::Vehicle).unwrap().clone();
        broken.calibration.remove(&root);
        assert_eq!(CalibrationGraph::load_from_meta(&broken).unwrap_err().code(), "MISSING_ROOT");
    }
}
