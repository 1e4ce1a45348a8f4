//! Export to the ROS1 bag v2.0 container.
//!
//! Each frame becomes one uncompressed chunk. Cameras map to
//! `sensor_msgs/Image`, LiDARs to `sensor_msgs/PointCloud2` and INS/GNSS
//! samples to `nav_msgs/Odometry` (one message per sample). Extrinsics go out
//! once, latched, as `tf2_msgs/TFMessage` at the start of the first chunk.

pub mod messages;
mod writer;

use std::collections::BTreeMap;
use std::io::{Seek, Write};

use serde::Serialize;
use thiserror::Error;

use crate::codec::{CodecError, DatasetReader, ReadAt};
use crate::model::{DatasetMeta, Frame, Modality, SensorId};

pub use messages::MessageType;
pub use writer::BAG_HEADER_RECORD_LEN;

pub const VERSION_LINE: &[u8; 13] = b"#ROSBAG V2.0\n";
pub const DEFAULT_CALIBRATION_TOPIC: &str = "/tf_static";

#[derive(Debug, Error)]
pub enum BagError {
    #[error("no topic mapped for sensor {0}")]
    UnmappedSensor(SensorId),
    #[error("invalid topic {0:?}: topics start with '/' and contain no whitespace")]
    InvalidTopic(String),
    #[error("topic {0:?} is already mapped")]
    DuplicateTopic(String),
    #[error("timestamp {0} ns does not fit ROS time")]
    TimestampOverflow(u64),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BagError {
    pub fn code(&self) -> &'static str {
        match self {
            BagError::UnmappedSensor(_) => "UNMAPPED_SENSOR",
            BagError::InvalidTopic(_) => "INVALID_TOPIC",
            BagError::DuplicateTopic(_) => "DUPLICATE_TOPIC",
            BagError::TimestampOverflow(_) => "TIMESTAMP_OVERFLOW",
            BagError::Codec(e) => e.code(),
            BagError::Io(_) => "IO_FAILURE",
        }
    }
}

/// Message type used for a sensor modality.
pub fn message_type(modality: Modality) -> MessageType {
    match modality {
        Modality::Camera => messages::IMAGE,
        Modality::Lidar => messages::POINT_CLOUD2,
        Modality::Ins | Modality::Gnss => messages::ODOMETRY,
    }
}

/// `frame_id` used in message headers and transforms, e.g. `vehicle/front_left`.
pub fn frame_id(sensor: &SensorId) -> String {
    format!("{}/{}", sensor.agent.as_str().to_lowercase(), sensor.name.to_lowercase())
}

/// Sensor to topic mapping, plus the optional calibration topic.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMap {
    topics: BTreeMap<SensorId, String>,
    calibration: Option<String>,
}

impl Default for TopicMap {
    fn default() -> Self {
        Self::new()
    }
}

impl TopicMap {
    /// No sensors and no calibration topic.
    pub fn new() -> Self {
        Self {
            topics: BTreeMap::new(),
            calibration: None,
        }
    }

    /// Default topics for every registered sensor and calibration on
    /// [`DEFAULT_CALIBRATION_TOPIC`].
    pub fn defaults(meta: &DatasetMeta) -> Result<Self, BagError> {
        let mut map = Self::new();
        map.set_calibration_topic(Some(DEFAULT_CALIBRATION_TOPIC.to_string()))?;
        for spec in &meta.sensor_registry {
            map.set(spec.id.clone(), Self::default_topic(&spec.id))?;
        }
        Ok(map)
    }

    /// `/<agent>/<modality>/<short name>`, where the short name drops a
    /// leading agent or modality token: `TOWER_LIDAR_TOP` gives
    /// `/tower/lidar/top`, `FRONT_LEFT` gives `/vehicle/camera/front_left`,
    /// and `INS` gives `/vehicle/ins`.
    pub fn default_topic(sensor: &SensorId) -> String {
        let agent = sensor.agent.as_str().to_lowercase();
        let modality = sensor.modality.as_str().to_lowercase();
        let mut short = sensor.name.as_str();
        short = short.strip_prefix(&format!("{}_", sensor.agent.as_str())).unwrap_or(short);
        let prefixes: &[&str] = match sensor.modality {
            Modality::Camera => &["CAMERA", "CAM"],
            Modality::Lidar => &["LIDAR"],
            Modality::Ins => &["INS"],
            Modality::Gnss => &["GNSS"],
        };
        for p in prefixes {
            if short == *p {
                short = "";
                break;
            }
            if let Some(rest) = short.strip_prefix(&format!("{p}_")) {
                short = rest;
                break;
            }
        }
        if short.is_empty() {
            format!("/{agent}/{modality}")
        } else {
            format!("/{agent}/{modality}/{}", short.to_lowercase())
        }
    }

    fn check(&self, topic: &str, except: Option<&SensorId>) -> Result<(), BagError> {
        if !topic.starts_with('/') || topic.len() < 2 || topic.chars().any(char::is_whitespace) {
            return Err(BagError::InvalidTopic(topic.to_string()));
        }
        let taken = self.topics.iter().any(|(s, t)| t == topic && Some(s) != except)
            || (self.calibration.as_deref() == Some(topic) && except.is_some());
        if taken {
            return Err(BagError::DuplicateTopic(topic.to_string()));
        }
        Ok(())
    }

    /// Maps (or remaps) a sensor to `topic`.
    pub fn set(&mut self, sensor: SensorId, topic: impl Into<String>) -> Result<(), BagError> {
        let topic = topic.into();
        self.check(&topic, Some(&sensor))?;
        self.topics.insert(sensor, topic);
        Ok(())
    }

    pub fn remove(&mut self, sensor: &SensorId) -> Option<String> {
        self.topics.remove(sensor)
    }

    /// `None` disables calibration export.
    pub fn set_calibration_topic(&mut self, topic: Option<String>) -> Result<(), BagError> {
        if let Some(t) = &topic {
            self.check(t, None)?;
        }
        self.calibration = topic;
        Ok(())
    }

    pub fn topic(&self, sensor: &SensorId) -> Option<&str> {
        self.topics.get(sensor).map(String::as_str)
    }

    pub fn calibration_topic(&self) -> Option<&str> {
        self.calibration.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SensorId, &str)> {
        self.topics.iter().map(|(s, t)| (s, t.as_str()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExportSummary {
    pub messages: u64,
    pub connections: u32,
    pub chunks: u32,
    pub bytes: u64,
    pub per_topic: BTreeMap<String, u64>,
}

/// Exports every frame of an open dataset.
pub fn export_bag<S: ReadAt, W: Write + Seek>(
    reader: &DatasetReader<S>,
    topics: &TopicMap,
    sink: W,
) -> Result<ExportSummary, BagError> {
    export_frames(reader.meta(), reader.frames(), topics, sink)
}

/// Exports frames from any source. Stops at the first error; the sink then
/// holds an incomplete bag.
pub fn export_frames<W: Write + Seek>(
    meta: &DatasetMeta,
    frames: impl IntoIterator<Item = Result<Frame, CodecError>>,
    topics: &TopicMap,
    sink: W,
) -> Result<ExportSummary, BagError> {
    let mut w = writer::BagWriter::start(sink)?;
    let mut calibration_pending = topics.calibration_topic().is_some();
    for frame in frames {
        let frame = frame?;
        let mut batch = writer::frame_messages(&frame, topics, &mut w)?;
        if batch.is_empty() {
            continue;
        }
        if calibration_pending {
            calibration_pending = false;
            let first = batch.iter().map(|m| m.time_ns).min().expect("nonempty");
            if let Some(msg) = writer::calibration_message(meta, topics, first, &mut w)? {
                batch.insert(0, msg);
            }
        }
        w.write_chunk(batch)?;
    }
    w.finish()
}
