use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Agent, CameraImage, InsRecord, Modality, ModelError, PointCloud, SensorId};

/// Payload stored for one sensor within a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum SensorRecord {
    Image(CameraImage),
    Cloud(PointCloud),
    /// All INS/GNSS samples falling in the frame's window.
    InsBlock(Vec<InsRecord>),
}

impl SensorRecord {
    /// Whether this payload kind may be stored for a sensor of `modality`.
    pub fn fits(&self, modality: Modality) -> bool {
        matches!(
            (self, modality),
            (SensorRecord::Image(_), Modality::Camera)
                | (SensorRecord::Cloud(_), Modality::Lidar)
                | (SensorRecord::InsBlock(_), Modality::Ins | Modality::Gnss)
        )
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SensorRecord::Image(_) => "image",
            SensorRecord::Cloud(_) => "cloud",
            SensorRecord::InsBlock(_) => "ins_block",
        }
    }

    pub fn as_image(&self) -> Option<&CameraImage> {
        match self {
            SensorRecord::Image(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_cloud(&self) -> Option<&PointCloud> {
        match self {
            SensorRecord::Cloud(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_ins(&self) -> Option<&[InsRecord]> {
        match self {
            SensorRecord::InsBlock(b) => Some(b),
            _ => None,
        }
    }

    /// Timestamps carried by the record (one for images and clouds, one per sample for INS).
    pub fn timestamps(&self) -> Vec<u64> {
        match self {
            SensorRecord::Image(i) => vec![i.timestamp],
            SensorRecord::Cloud(c) => vec![c.frame_timestamp],
            SensorRecord::InsBlock(b) => b.iter().map(|r| r.timestamp).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            SensorRecord::Image(i) => i.validate(),
            SensorRecord::Cloud(c) => c.validate(),
            SensorRecord::InsBlock(b) => b.iter().try_for_each(InsRecord::validate),
        }
    }
}

/// One synchronized snapshot: every sensor's record for a single trigger.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u64,
    /// Trigger instant, nanoseconds since the Unix epoch (UTC).
    pub reference_timestamp: u64,
    #[serde(with = "super::sensor_map")]
    pub records: BTreeMap<SensorId, SensorRecord>,
    /// Sensors that were expected for this frame but delivered nothing.
    pub missing: BTreeSet<SensorId>,
}

impl Frame {
    pub fn new(index: u64, reference_timestamp: u64) -> Self {
        Self {
            index,
            reference_timestamp,
            ..Default::default()
        }
    }

    /// Inserts an image or cloud under its own sensor id. Returns the record it replaced.
    pub fn insert(&mut self, record: SensorRecord) -> Option<SensorRecord> {
        let sensor = match &record {
            SensorRecord::Image(i) => i.sensor.clone(),
            SensorRecord::Cloud(c) => c.sensor.clone(),
            SensorRecord::InsBlock(_) => panic!("INS blocks carry no sensor id; use insert_ins"),
        };
        self.records.insert(sensor, record)
    }

    pub fn insert_ins(&mut self, sensor: SensorId, block: Vec<InsRecord>) -> Option<SensorRecord> {
        self.records.insert(sensor, SensorRecord::InsBlock(block))
    }

    pub fn get(&self, sensor: &SensorId) -> Option<&SensorRecord> {
        self.records.get(sensor)
    }

    /// Looks a record up by agent and registry token, e.g. `(Vehicle, "FRONT_LEFT")`.
    pub fn lookup(&self, agent: Agent, name: &str) -> Option<(&SensorId, &SensorRecord)> {
        self.records
            .iter()
            .find(|(id, _)| id.agent == agent && id.name == name)
    }

    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    /// Presence flag for each sensor in `expected`.
    pub fn completeness<'a>(
        &self,
        expected: impl IntoIterator<Item = &'a SensorId>,
    ) -> BTreeMap<SensorId, bool> {
        expected
            .into_iter()
            .map(|id| (id.clone(), self.records.contains_key(id)))
            .collect()
    }

    /// Checks that images and clouds are stored under their own sensor id.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (id, rec) in &self.records {
            let embedded = match rec {
                SensorRecord::Image(i) => Some(&i.sensor),
                SensorRecord::Cloud(c) => Some(&c.sensor),
                SensorRecord::InsBlock(_) => None,
            };
            if embedded.is_some_and(|e| e != id) {
                return Err(ModelError::RegistryViolation(format!(
                    "record stored under {id} names a different sensor"
                )));
            }
            if !rec.fits(id.modality) {
                return Err(ModelError::RegistryViolation(format!(
                    "{} payload stored for {} sensor {id}",
                    rec.kind_name(),
                    id.modality
                )));
            }
            rec.validate()?;
        }
        Ok(())
    }
}
