//! Deterministic synthetic datasets for tests, benchmarks and demos.
//!
//! Calibration values are placeholders chosen to look like a roof-mounted
//! sensor rig; no measured extrinsics are published.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    standard_registry, Agent, CameraImage, CameraIntrinsics, DatasetMeta, FormatVersion, Frame, ImageEncoding,
    InsRecord, Modality, Point, PointCloud, RigidTransform, SensorId, SensorRecord,
};

/// 2024-06-01T00:00:00Z in nanoseconds.
pub const BASE_TIMESTAMP: u64 = 1_717_200_000_000_000_000;
pub const FRAME_PERIOD_NS: u64 = 100_000_000;

/// Seeded generator used by every fixture.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rotation taking LiDAR axes (x forward, z up) to camera axes (z forward, y down).
fn lidar_to_camera_axes() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

/// Placeholder root-to-sensor calibration for a registry sensor.
fn placeholder_calibration(id: &SensorId, slot: usize) -> RigidTransform {
    if id.is_root() {
        return RigidTransform::identity();
    }
    let yaw = match id.name.as_str() {
        "STEREO_LEFT" | "STEREO_RIGHT" | "FRONT_LEFT" | "FRONT_RIGHT" => 0.0,
        "BACK_LEFT" => 2.6,
        "BACK_RIGHT" => -2.6,
        "LIDAR_LEFT" | "TOWER_CAM_1" | "TOWER_LIDAR_1" => 0.5,
        "LIDAR_RIGHT" | "TOWER_CAM_2" | "TOWER_LIDAR_2" => -0.5,
        _ => 0.05 * slot as f64,
    };
    let side = if id.name.contains("RIGHT") || id.name.ends_with('2') { -1.0 } else { 1.0 };
    let offset = Vector3::new(0.4 + 0.01 * slot as f64, 0.3 * side, -0.25);
    // Sensor pose in the root frame, then inverted into root-to-sensor.
    let yaw_rot = RigidTransform::from_axis_angle(Vector3::new(0.0, 0.0, yaw), offset);
    let sensor_in_root = if id.modality == Modality::Camera {
        let axes = RigidTransform::new(lidar_to_camera_axes().transpose(), Vector3::zeros()).expect("permutation");
        yaw_rot.compose(&axes)
    } else {
        yaw_rot
    };
    sensor_in_root.inverse()
}

/// Dataset meta over the full as-built registry with nominal intrinsics and
/// placeholder extrinsics.
pub fn meta() -> DatasetMeta {
    meta_for(standard_registry())
}

/// Meta over a subset of the standard registry (every agent keeps its root).
pub fn meta_with(keep: impl Fn(&SensorId) -> bool) -> DatasetMeta {
    meta_for(
        standard_registry()
            .into_iter()
            .filter(|s| s.id.is_root() || keep(&s.id))
            .collect(),
    )
}

fn meta_for(registry: Vec<crate::model::SensorSpec>) -> DatasetMeta {
    let mut intrinsics = BTreeMap::new();
    let mut calibration = BTreeMap::new();
    for (slot, spec) in registry.iter().enumerate() {
        if spec.id.modality == Modality::Camera {
            let (w, h) = spec.resolution.expect("cameras list a resolution");
            let fx = CameraIntrinsics::focal_for_fov(w, spec.hfov_deg.expect("cameras list a FOV"));
            let mut k = CameraIntrinsics::ideal(fx, fx, w, h);
            k.distortion = [-0.08, 0.012, 0.0004, -0.0003, 0.0];
            intrinsics.insert(spec.id.clone(), k);
        }
        calibration.insert(spec.id.clone(), placeholder_calibration(&spec.id, slot));
    }
    let mut agents: Vec<Agent> = registry.iter().map(|s| s.id.agent).collect();
    agents.dedup();
    DatasetMeta {
        format_version: FormatVersion::CURRENT,
        data_drop_id: "synthetic-drop-0".into(),
        agents,
        sensor_registry: registry,
        intrinsics,
        calibration,
        creation_time: BASE_TIMESTAMP,
    }
}

/// Size knobs for generated frames.
#[derive(Clone, Copy, Debug)]
pub struct FrameShape {
    /// Stored image size; kept tiny by default so fixtures stay small.
    pub image: (u32, u32),
    pub points: usize,
    pub ins_samples: usize,
}

impl Default for FrameShape {
    fn default() -> Self {
        Self {
            image: (8, 6),
            points: 20,
            ins_samples: 10,
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R) -> Point {
    Point {
        x: rng.gen_range(-60.0..60.0),
        y: rng.gen_range(-60.0..60.0),
        z: rng.gen_range(-3.0..8.0),
        intensity: rng.gen_range(0.0..=1.0),
        dt_ns: rng.gen_range(0..crate::model::MAX_POINT_DT_NS),
        channel: rng.gen_range(0..128),
    }
}

/// Record for one sensor at one trigger instant.
pub fn record_for<R: Rng>(id: &SensorId, reference: u64, shape: &FrameShape, rng: &mut R) -> SensorRecord {
    match id.modality {
        Modality::Camera => {
            let (w, h) = shape.image;
            let encoding = *[ImageEncoding::Rgb8, ImageEncoding::Bgr8, ImageEncoding::Mono8]
                .choose(rng)
                .expect("non-empty");
            let mut pixels = vec![0u8; CameraImage::expected_len(w, h, encoding)];
            rng.fill(pixels.as_mut_slice());
            let timestamp = reference + rng.gen_range(0..2_000_000);
            SensorRecord::Image(CameraImage::new(id.clone(), timestamp, w, h, encoding, pixels, 800).expect("sized buffer"))
        }
        Modality::Lidar => {
            let points = (0..shape.points).map(|_| random_point(rng)).collect();
            SensorRecord::Cloud(PointCloud {
                sensor: id.clone(),
                frame_timestamp: reference,
                points,
            })
        }
        Modality::Ins | Modality::Gnss => {
            let n = shape.ins_samples.max(1) as u64;
            let step = FRAME_PERIOD_NS / n;
            let start = reference - FRAME_PERIOD_NS / 2;
            let block = (0..n)
                .map(|i| {
                    let yaw: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let mut r = InsRecord::at_rest(
                        start + i * step,
                        48.13 + rng.gen_range(-1e-4..1e-4),
                        11.58 + rng.gen_range(-1e-4..1e-4),
                        520.0 + rng.gen_range(-1.0..1.0),
                    );
                    r.orientation = [0.0, 0.0, (yaw / 2.0).sin(), (yaw / 2.0).cos()];
                    r.velocity = [rng.gen_range(0.0..15.0), rng.gen_range(-0.5..0.5), 0.0];
                    r.angular_rate = [0.0, 0.0, rng.gen_range(-0.3..0.3)];
                    r
                })
                .collect();
            SensorRecord::InsBlock(block)
        }
    }
}

/// A frame carrying a record for every registry sensor.
pub fn full_frame<R: Rng>(meta: &DatasetMeta, index: u64, shape: &FrameShape, rng: &mut R) -> Frame {
    let reference = BASE_TIMESTAMP + index * FRAME_PERIOD_NS;
    let mut frame = Frame::new(index, reference);
    for spec in &meta.sensor_registry {
        frame
            .records
            .insert(spec.id.clone(), record_for(&spec.id, reference, shape, rng));
    }
    frame
}

/// `frames` complete frames over [`meta()`], deterministic for a given seed.
pub fn dataset(frames: usize, shape: &FrameShape, seed: u64) -> (DatasetMeta, Vec<Frame>) {
    let meta = meta();
    let mut rng = rng(seed);
    let frames = (0..frames as u64)
        .map(|i| full_frame(&meta, i, shape, &mut rng))
        .collect();
    (meta, frames)
}

/// The small dataset used for exhaustive corruption sweeps: 3 frames, every
/// sensor present, well under 64 KiB on disk.
pub fn small_dataset() -> (DatasetMeta, Vec<Frame>) {
    dataset(3, &FrameShape::default(), 7)
}

/// A random dataset: up to `max_frames` frames (possibly zero), each with a
/// random subset of sensors present, the rest listed as missing or simply
/// absent, and up to `max_points` points per cloud.
pub fn random_dataset<R: Rng>(rng: &mut R, max_frames: usize, max_points: usize) -> (DatasetMeta, Vec<Frame>) {
    let meta = meta();
    let n = rng.gen_range(0..=max_frames);
    let mut index = rng.gen_range(0..5u64);
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let reference = BASE_TIMESTAMP + index * FRAME_PERIOD_NS;
        let mut frame = Frame::new(index, reference);
        let lidars = meta
            .sensor_registry
            .iter()
            .filter(|s| s.id.modality == Modality::Lidar)
            .count()
            .max(1);
        let shape = FrameShape {
            image: (rng.gen_range(1..24), rng.gen_range(1..16)),
            points: rng.gen_range(0..=max_points / lidars),
            ins_samples: rng.gen_range(0..20),
        };
        for spec in &meta.sensor_registry {
            match rng.gen_range(0..10) {
                0 => {
                    frame.missing.insert(spec.id.clone());
                }
                1 => {}
                _ => {
                    frame
                        .records
                        .insert(spec.id.clone(), record_for(&spec.id, reference, &shape, rng));
                }
            }
        }
        frames.push(frame);
        index += rng.gen_range(1..3);
    }
    (meta, frames)
}

/// Lazily generated frames for large-file tests: each frame carries one
/// LiDAR cloud and one camera image of roughly `frame_bytes` in total.
pub fn bulk_frames(meta: &DatasetMeta, count: u64, frame_bytes: usize, seed: u64) -> impl Iterator<Item = Frame> + '_ {
    let mut rng = rng(seed);
    let lidar = meta.root_of(Agent::Vehicle).expect("vehicle root").clone();
    let camera = meta
        .sensor_registry
        .iter()
        .find(|s| s.id.modality == Modality::Camera)
        .map(|s| s.id.clone());
    (0..count).map(move |i| {
        let reference = BASE_TIMESTAMP + i * FRAME_PERIOD_NS;
        let mut frame = Frame::new(i, reference);
        let half = frame_bytes / 2;
        let points = (0..half / 24).map(|_| random_point(&mut rng)).collect();
        frame.insert(SensorRecord::Cloud(PointCloud {
            sensor: lidar.clone(),
            frame_timestamp: reference,
            points,
        }));
        if let Some(cam) = &camera {
            let w = 1024u32;
            let h = (half / (3 * w as usize)).max(1) as u32;
            let mut pixels = vec![0u8; CameraImage::expected_len(w, h, ImageEncoding::Rgb8)];
            rng.fill(&mut pixels[..]);
            frame.insert(SensorRecord::Image(
                CameraImage::new(cam.clone(), reference, w, h, ImageEncoding::Rgb8, pixels, 800).expect("sized buffer"),
            ));
        }
        frame
    })
}
