mod common;

use std::collections::BTreeSet;

use fmse_core::assemble::{
    assemble, drift_ppm, flatten_frames, AssemblyConfig, OrphanReason, RawPayload, RawRecord, TriggerModel,
};
use fmse_core::fixtures::{self, FrameShape};
use fmse_core::model::{Agent, CameraImage, ImageEncoding, SensorId};
use proptest::prelude::*;
use rand::Rng;

use common::geometry::nearest_trigger_oracle;

const MS: u64 = 1_000_000;

fn camera() -> SensorId {
    fixtures::meta().find_by_name("FRONT_LEFT")[0].clone()
}

fn image_at(sensor: &SensorId, t: u64) -> RawRecord {
    RawRecord {
        sensor: sensor.clone(),
        payload: RawPayload::Image(CameraImage::new(sensor.clone(), t, 1, 1, ImageEncoding::Mono8, vec![0], 800).unwrap()),
    }
}

#[test]
fn near_trigger_records_fill_consecutive_frames() {
    let cam = camera();
    let records = [0, 99, 201].map(|ms| image_at(&cam, ms * MS));
    let (frames, report) = assemble(records, &TriggerModel::with_phase(0), &AssemblyConfig::default()).unwrap();
    assert!(report.orphans.is_empty());
    let got: Vec<_> = frames.iter().map(|f| (f.index, f.reference_timestamp, f.records[&cam].timestamps()[0])).collect();
    assert_eq!(got, vec![(0, 0, 0), (1, 100 * MS, 99 * MS), (2, 200 * MS, 201 * MS)]);
    for (t, (k, _, _)) in [0, 99, 201].iter().zip(&got) {
        assert_eq!(nearest_trigger_oracle(t * MS, &TriggerModel::with_phase(0)).0, *k);
    }
}

#[test]
fn midpoint_record_is_orphaned() {
    let cam = camera();
    let (frames, report) = assemble(
        [image_at(&cam, 150 * MS)],
        &TriggerModel::with_phase(0),
        &AssemblyConfig::default(),
    )
    .unwrap();
    assert!(frames.is_empty());
    assert_eq!(report.orphans.len(), 1);
    assert_eq!(
        report.orphans[0].reason,
        OrphanReason::OutsideTolerance {
            nearest_frame: 1,
            delta_ns: 50 * MS as i64
        }
    );
}

#[test]
fn free_running_sensor_attaches_anyway() {
    let cam = camera();
    let cfg = AssemblyConfig {
        free_running: BTreeSet::from([cam.clone()]),
        ..AssemblyConfig::default()
    };
    let (frames, report) = assemble([image_at(&cam, 140 * MS)], &TriggerModel::with_phase(0), &cfg).unwrap();
    assert!(report.orphans.is_empty());
    assert_eq!(frames[0].index, 1);
    assert_eq!(report.free_running_offsets[0].delta_ns, 40 * MS as i64);
}

#[test]
fn duplicates_keep_the_closest_record() {
    let cam = camera();
    let (frames, report) = assemble(
        [image_at(&cam, 95 * MS), image_at(&cam, 101 * MS), image_at(&cam, 105 * MS)],
        &TriggerModel::with_phase(0),
        &AssemblyConfig::default(),
    )
    .unwrap();
    assert_eq!(frames[0].records[&cam].timestamps(), vec![101 * MS]);
    assert_eq!(report.duplicates.len(), 2);
    assert!(report.duplicates.iter().all(|d| d.kept_timestamp == 101 * MS));
}

#[test]
fn unsorted_input_is_rejected() {
    let cam = camera();
    let err = assemble(
        [image_at(&cam, 200 * MS), image_at(&cam, 100 * MS)],
        &TriggerModel::with_phase(0),
        &AssemblyConfig::default(),
    )
    .unwrap_err();
    assert_eq!(err.code(), "UNSORTED_INPUT");
}

#[test]
fn flattened_dataset_reassembles_to_itself() {
    let (meta, frames) = fixtures::dataset(6, &FrameShape::default(), 17);
    let cfg = AssemblyConfig {
        required: meta.sensor_registry.iter().map(|s| s.id.clone()).collect(),
        ..AssemblyConfig::default()
    };
    let trigger = TriggerModel::with_phase(fixtures::BASE_TIMESTAMP);
    let (rebuilt, report) = assemble(flatten_frames(&frames), &trigger, &cfg).unwrap();
    assert!(report.orphans.is_empty() && report.duplicates.is_empty() && report.incomplete_frames.is_empty());
    assert_eq!(rebuilt, frames);
}

#[test]
fn drift_recovers_injected_skew() {
    let trigger = TriggerModel::with_phase(0);
    // +1 µs per frame at a 100 ms period is 10 ppm
    let skewed: Vec<u64> = (0..200).map(|k| k * 100 * MS + 3 * MS + k * 1_000).collect();
    assert!((drift_ppm(&skewed, &trigger).unwrap() - 10.0).abs() < 0.1);
    let periodic: Vec<u64> = (0..50).map(|k| k * 100 * MS).collect();
    assert!(drift_ppm(&periodic, &trigger).unwrap().abs() < 1e-9);
    let offset: Vec<u64> = (0..50).map(|k| k * 100 * MS + 4 * MS).collect();
    assert!(drift_ppm(&offset, &trigger).unwrap().abs() < 1e-9);
    assert_eq!(drift_ppm(&skewed[..5], &trigger).unwrap_err().code(), "INSUFFICIENT_SAMPLES");
}

fn jittered_dump(seed: u64, frames: u64, max_jitter: u64) -> (Vec<RawRecord>, Vec<SensorId>) {
    let meta = fixtures::meta();
    let sensors: Vec<SensorId> = meta
        .sensor_registry
        .iter()
        .map(|s| s.id.clone())
        .filter(|s| s.agent == Agent::Vehicle && s.modality == fmse_core::model::Modality::Camera)
        .collect();
    let mut rng = fixtures::rng(seed);
    let mut out = Vec::new();
    for k in 0..frames {
        for s in &sensors {
            let j = rng.gen_range(0..=2 * max_jitter) as i64 - max_jitter as i64;
            let t = (fixtures::BASE_TIMESTAMP + k * 100 * MS) as i64 + j;
            out.push(image_at(s, t as u64));
        }
    }
    (out, sensors)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_matches_scan(t in 0u64..10_000_000_000, phase in 0u64..300_000_000, period in 1u64..200_000_000) {
        let trigger = TriggerModel { period_ns: period, phase_ns: phase, duty_cycle: 0.5 };
        prop_assert_eq!(trigger.nearest(t), nearest_trigger_oracle(t, &trigger));
    }

    #[test]
    fn jitter_below_tolerance_leaves_no_orphans(seed in any::<u64>(), jitter in 0u64..=10 * MS) {
        let (records, sensors) = jittered_dump(seed, 8, jitter);
        let cfg = AssemblyConfig { required: sensors.iter().cloned().collect(), ..AssemblyConfig::default() };
        let (frames, report) =
            assemble(records, &TriggerModel::with_phase(fixtures::BASE_TIMESTAMP), &cfg).unwrap();
        prop_assert!(report.orphans.is_empty());
        prop_assert!(report.incomplete_frames.is_empty());
        prop_assert_eq!(frames.len(), 8);
        prop_assert_eq!(report.assigned, report.total_records);
    }

    #[test]
    fn every_record_is_accounted_for(seed in any::<u64>()) {
        let (records, _) = jittered_dump(seed, 5, 30 * MS);
        let n = records.len();
        let (frames, report) =
            assemble(records, &TriggerModel::with_phase(fixtures::BASE_TIMESTAMP), &AssemblyConfig::default()).unwrap();
        let kept: usize = frames.iter().map(|f| f.records.len()).sum();
        prop_assert_eq!(kept + report.orphans.len() + report.duplicates.len(), n);
    }
}
