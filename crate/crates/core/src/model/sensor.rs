use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Agent {
    Vehicle,
    Tower,
}

impl Agent {
    pub const ALL: [Agent; 2] = [Agent::Vehicle, Agent::Tower];

    /// Registry name of the spinning top LiDAR every extrinsic is expressed against.
    pub fn root_name(self) -> &'static str {
        match self {
            Agent::Vehicle => "LIDAR_TOP",
            Agent::Tower => "TOWER_LIDAR_TOP",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Vehicle => "VEHICLE",
            Agent::Tower => "TOWER",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Modality {
    Camera,
    Lidar,
    Ins,
    Gnss,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Camera => "CAMERA",
            Modality::Lidar => "LIDAR",
            Modality::Ins => "INS",
            Modality::Gnss => "GNSS",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sensor instance: owning agent, registry token and modality.
///
/// Tokens are upper-case identifiers (`FRONT_LEFT`, `TOWER_LIDAR_1`) so they
/// can double as attribute names in frame access paths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "SensorIdRepr")]
pub struct SensorId {
    pub agent: Agent,
    pub name: String,
    pub modality: Modality,
}

#[derive(Deserialize)]
struct SensorIdRepr {
    agent: Agent,
    name: String,
    modality: Modality,
}

impl TryFrom<SensorIdRepr> for SensorId {
    type Error = ModelError;

    fn try_from(r: SensorIdRepr) -> Result<Self, ModelError> {
        SensorId::new(r.agent, r.name, r.modality)
    }
}

impl SensorId {
    pub fn new(agent: Agent, name: impl Into<String>, modality: Modality) -> Result<Self, ModelError> {
        let name = name.into();
        let valid = name
            .bytes()
            .next()
            .is_some_and(|b| b.is_ascii_uppercase())
            && name
                .bytes()
                .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_');
        if !valid {
            return Err(ModelError::InvalidSensorName(name));
        }
        Ok(Self {
            agent,
            name,
            modality,
        })
    }

    pub fn is_root(&self) -> bool {
        self.name == self.agent.root_name()
    }

    /// `(agent, name)`, the part that must be unique within a registry.
    pub fn key(&self) -> (Agent, &str) {
        (self.agent, &self.name)
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.agent, self.name)
    }
}

/// Datasheet entry for one sensor.
///
/// `resolution` is `(width, height)` in pixels for cameras and
/// `(azimuth bins, channels)` for LiDARs. Optional fields are absent for
/// sensors whose datasheet gives no value (the INS has no field of view).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: SensorId,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub resolution: Option<(u32, u32)>,
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    #[serde(default)]
    pub hfov_deg: Option<f64>,
    #[serde(default)]
    pub vfov_deg: Option<f64>,
    #[serde(default)]
    pub details: BTreeMap<String, String>,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |why: &str| Err(ModelError::InvalidSensorSpec(format!("{}: {why}", self.id)));
        if let Some(f) = self.frequency_hz {
            if !(f.is_finite() && f > 0.0) {
                return bad("frequency must be > 0");
            }
        }
        if let Some(h) = self.hfov_deg {
            if !(h > 0.0 && h <= 360.0) {
                return bad("hfov must lie in (0, 360]");
            }
        }
        if let Some(v) = self.vfov_deg {
            if !(v > 0.0 && v <= 180.0) {
                return bad("vfov must lie in (0, 180]");
            }
        }
        if let Some((w, h)) = self.resolution {
            if w == 0 || h == 0 {
                return bad("resolution must be non-zero");
            }
        }
        Ok(())
    }
}

/// The as-built sensor set of the bus and the tower, one entry per instance.
pub fn standard_registry() -> Vec<SensorSpec> {
    use Agent::*;
    use Modality::*;

    #[allow(clippy::too_many_arguments)]
    fn spec(
        agent: Agent,
        name: &str,
        modality: Modality,
        model: &str,
        resolution: Option<(u32, u32)>,
        frequency_hz: Option<f64>,
        fov: Option<(f64, f64)>,
        details: &[(&str, &str)],
    ) -> SensorSpec {
        SensorSpec {
            id: SensorId::new(agent, name, modality).expect("static token"),
            model: model.to_string(),
            resolution,
            frequency_hz,
            hfov_deg: fov.map(|f| f.0),
            vfov_deg: fov.map(|f| f.1),
            details: details
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    let narrow_cam = [
        ("exposure_time", "800us"),
        ("focal_length", "6mm"),
        ("aperture", "f/4.0"),
    ];
    let wide_cam = [
        ("exposure_time", "800us"),
        ("focal_length", "4mm"),
        ("aperture", "f/4.0"),
    ];
    let cam = "a2A1920-51gcPRO";
    let hd = Some((1920, 1200));
    let ten = Some(10.0);

    let mut out = Vec::new();
    for name in ["STEREO_LEFT", "STEREO_RIGHT", "BACK_LEFT", "BACK_RIGHT"] {
        out.push(spec(Vehicle, name, Camera, cam, hd, ten, Some((57.6, 37.7)), &narrow_cam));
    }
    for name in ["FRONT_LEFT", "FRONT_RIGHT"] {
        out.push(spec(Vehicle, name, Camera, cam, hd, ten, Some((79.1, 54.3)), &wide_cam));
    }
    out.push(spec(
        Vehicle,
        "LIDAR_TOP",
        Lidar,
        "OS1",
        Some((1024, 128)),
        ten,
        Some((360.0, 45.0)),
        &[("range_10pct", "90m")],
    ));
    for name in ["LIDAR_LEFT", "LIDAR_RIGHT"] {
        out.push(spec(
            Vehicle,
            name,
            Lidar,
            "OS0",
            Some((1024, 128)),
            ten,
            Some((360.0, 90.0)),
            &[("range_10pct", "35m")],
        ));
    }
    out.push(spec(
        Vehicle,
        "INS",
        Ins,
        "3DM-GQ7",
        None,
        Some(1000.0),
        None,
        &[
            ("accuracy", "1cm RTK"),
            ("heading_accuracy", "0.2deg"),
            ("pitch_roll_accuracy", "0.05deg"),
        ],
    ));

    let tower_cam = [
        ("exposure_time", "800us"),
        ("focal_length", "6mm"),
        ("aperture", "f/4.0"),
    ];
    for name in ["TOWER_CAM_1", "TOWER_CAM_2"] {
        out.push(spec(Tower, name, Camera, cam, hd, ten, Some((57.6, 37.7)), &tower_cam));
    }
    for name in ["TOWER_LIDAR_1", "TOWER_LIDAR_2"] {
        out.push(spec(
            Tower,
            name,
            Lidar,
            "Cube 1 Outdoor",
            Some((400, 51)),
            ten,
            Some((70.0, 30.0)),
            &[("range_10pct", "30m")],
        ));
    }
    out.push(spec(
        Tower,
        "TOWER_LIDAR_TOP",
        Lidar,
        "OS2",
        Some((1024, 128)),
        ten,
        Some((360.0, 22.5)),
        &[("range_10pct", "200m")],
    ));
    out.push(spec(
        Tower,
        "GNSS",
        Gnss,
        "C099-F9P",
        None,
        None,
        None,
        &[("role", "RTK base"), ("positioning", "PPP with > 1h data")],
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_validation() {
        assert!(SensorId::new(Agent::Vehicle, "FRONT_LEFT", Modality::Camera).is_ok());
        assert!(SensorId::new(Agent::Vehicle, "front_left", Modality::Camera).is_err());
        assert!(SensorId::new(Agent::Vehicle, "", Modality::Camera).is_err());
        assert!(SensorId::new(Agent::Vehicle, "1CAM", Modality::Camera).is_err());
        let bad = r#"{"agent":"VEHICLE","name":"x y","modality":"CAMERA"}"#;
        assert!(serde_json::from_str::<SensorId>(bad).is_err());
    }

    #[test]
    fn standard_registry_is_valid_and_unique() {
        let reg = standard_registry();
        assert_eq!(reg.len(), 16);
        let mut keys: Vec<_> = reg.iter().map(|s| s.id.key()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), reg.len());
        for s in &reg {
            s.validate().unwrap();
        }
        for agent in Agent::ALL {
            assert!(reg.iter().any(|s| s.id.agent == agent && s.id.is_root()));
        }
    }

    #[test]
    fn spec_rejects_bad_fov() {
        let mut s = standard_registry().remove(0);
        s.hfov_deg = Some(0.0);
        assert!(s.validate().is_err());
        s.hfov_deg = Some(360.0);
        s.vfov_deg = Some(181.0);
        assert!(s.validate().is_err());
        s.vfov_deg = Some(20.0);
        s.frequency_hz = Some(-1.0);
        assert!(s.validate().is_err());
    }
}
