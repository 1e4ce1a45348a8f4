//! Association of raw timestamped records into trigger-aligned frames.
//!
//! The vehicle PLC fires a 10 Hz trigger; trigger `k` happens at
//! `phase + k · period`. Triggered sensors attach to the nearest trigger
//! within a tolerance, free-running sensors to the nearest trigger
//! unconditionally, and INS/GNSS samples to the half-open window
//! `[reference − period/2, reference + period/2)` around each trigger.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CameraImage, Frame, InsRecord, PointCloud, SensorId, SensorRecord};

pub const DEFAULT_PERIOD_NS: u64 = 100_000_000;
pub const DEFAULT_TOLERANCE_NS: u64 = 10_000_000;
/// Fewest samples the drift estimator accepts.
pub const MIN_DRIFT_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("records of {sensor} are not sorted: {got} follows {previous}")]
    UnsortedInput { sensor: SensorId, previous: u64, got: u64 },
    #[error("invalid assembly configuration: {0}")]
    InvalidConfig(String),
    #[error("drift estimation needs at least {MIN_DRIFT_SAMPLES} samples spanning two triggers, got {0}")]
    InsufficientSamples(usize),
}

impl AssembleError {
    pub fn code(&self) -> &'static str {
        match self {
            AssembleError::UnsortedInput { .. } => "UNSORTED_INPUT",
            AssembleError::InvalidConfig(_) => "INVALID_CONFIG",
            AssembleError::InsufficientSamples(_) => "INSUFFICIENT_SAMPLES",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerModel {
    pub period_ns: u64,
    /// Time of trigger 0.
    pub phase_ns: u64,
    /// Informational; the association only uses the rising edges.
    pub duty_cycle: f64,
}

impl Default for TriggerModel {
    fn default() -> Self {
        Self {
            period_ns: DEFAULT_PERIOD_NS,
            phase_ns: 0,
            duty_cycle: 0.5,
        }
    }
}

impl TriggerModel {
    pub fn with_phase(phase_ns: u64) -> Self {
        Self {
            phase_ns,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AssembleError> {
        if self.period_ns == 0 {
            return Err(AssembleError::InvalidConfig("trigger period must be positive".into()));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(AssembleError::InvalidConfig("duty cycle must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn trigger_time(&self, k: u64) -> u64 {
        self.phase_ns + k * self.period_ns
    }

    /// Nearest trigger `k ≥ 0` and the signed offset `t − trigger_time(k)`.
    /// Exact midpoints go to the earlier trigger.
    pub fn nearest(&self, t: u64) -> (u64, i64) {
        if t <= self.phase_ns {
            return (0, -((self.phase_ns - t) as i64));
        }
        let since = t - self.phase_ns;
        let (q, r) = (since / self.period_ns, since % self.period_ns);
        if 2 * r > self.period_ns {
            (q + 1, r as i64 - self.period_ns as i64)
        } else {
            (q, r as i64)
        }
    }

    /// Trigger whose window `[ref − p/2, ref + p/2)` contains `t`, if any.
    pub fn window(&self, t: u64) -> Option<u64> {
        let shifted = t + self.period_ns / 2;
        (shifted >= self.phase_ns).then(|| (shifted - self.phase_ns) / self.period_ns)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub tolerance_ns: u64,
    /// Sensors that cannot be triggered and attach to the nearest trigger.
    pub free_running: BTreeSet<SensorId>,
    /// Sensors whose absence makes a frame incomplete.
    pub required: BTreeSet<SensorId>,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            tolerance_ns: DEFAULT_TOLERANCE_NS,
            free_running: BTreeSet::new(),
            required: BTreeSet::new(),
        }
    }
}

/// Payload of a raw, not yet associated record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum RawPayload {
    Image(CameraImage),
    Cloud(PointCloud),
    Ins(InsRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub sensor: SensorId,
    pub payload: RawPayload,
}

impl RawRecord {
    pub fn timestamp(&self) -> u64 {
        match &self.payload {
            RawPayload::Image(i) => i.timestamp,
            RawPayload::Cloud(c) => c.frame_timestamp,
            RawPayload::Ins(r) => r.timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrphanReason {
    /// Nearest trigger is farther than the tolerance.
    OutsideTolerance { nearest_frame: u64, delta_ns: i64 },
    /// INS sample earlier than the first trigger window.
    BeforeFirstWindow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Orphan {
    pub sensor: SensorId,
    pub timestamp: u64,
    pub reason: OrphanReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Duplicate {
    pub sensor: SensorId,
    pub timestamp: u64,
    pub frame_index: u64,
    /// Timestamp of the record that was kept instead.
    pub kept_timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IncompleteFrame {
    pub frame_index: u64,
    pub missing: Vec<SensorId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FreeRunningOffset {
    pub sensor: SensorId,
    pub frame_index: u64,
    pub delta_ns: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub sensor: SensorId,
    pub drift_ppm: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssemblyReport {
    /// Triggers with at least one assigned record.
    pub frames_built: usize,
    pub total_records: usize,
    pub assigned: usize,
    pub orphans: Vec<Orphan>,
    pub duplicates: Vec<Duplicate>,
    pub incomplete_frames: Vec<IncompleteFrame>,
    pub free_running_offsets: Vec<FreeRunningOffset>,
    /// Per triggered sensor with enough samples.
    pub drift: Vec<DriftEstimate>,
}

struct Candidate {
    record: RawRecord,
    abs_delta: u64,
}

/// Groups `records` into frames. Records of each sensor must be in
/// nondecreasing timestamp order; different sensors may interleave freely.
pub fn assemble(
    records: impl IntoIterator<Item = RawRecord>,
    trigger: &TriggerModel,
    cfg: &AssemblyConfig,
) -> Result<(Vec<Frame>, AssemblyReport), AssembleError> {
    trigger.validate()?;
    if 2 * cfg.tolerance_ns >= trigger.period_ns {
        return Err(AssembleError::InvalidConfig(format!(
            "tolerance {} ns must be below half the period ({} ns)",
            cfg.tolerance_ns, trigger.period_ns
        )));
    }

    let mut report = AssemblyReport::default();
    let mut last_seen: BTreeMap<SensorId, u64> = BTreeMap::new();
    let mut chosen: BTreeMap<(u64, SensorId), Candidate> = BTreeMap::new();
    let mut ins_blocks: BTreeMap<(u64, SensorId), Vec<InsRecord>> = BTreeMap::new();
    let mut drift_series: BTreeMap<SensorId, Vec<u64>> = BTreeMap::new();

    for record in records {
        report.total_records += 1;
        let t = record.timestamp();
        if let Some(&previous) = last_seen.get(&record.sensor) {
            if t < previous {
                return Err(AssembleError::UnsortedInput {
                    sensor: record.sensor,
                    previous,
                    got: t,
                });
            }
        }
        last_seen.insert(record.sensor.clone(), t);

        if let RawPayload::Ins(sample) = record.payload {
            match trigger.window(t) {
                Some(k) => {
                    ins_blocks.entry((k, record.sensor)).or_default().push(sample);
                    report.assigned += 1;
                }
                None => report.orphans.push(Orphan {
                    sensor: record.sensor,
                    timestamp: t,
                    reason: OrphanReason::BeforeFirstWindow,
                }),
            }
            continue;
        }

        let (k, delta) = trigger.nearest(t);
        let abs_delta = delta.unsigned_abs();
        let free = cfg.free_running.contains(&record.sensor);
        if !free && abs_delta > cfg.tolerance_ns {
            report.orphans.push(Orphan {
                sensor: record.sensor,
                timestamp: t,
                reason: OrphanReason::OutsideTolerance {
                    nearest_frame: k,
                    delta_ns: delta,
                },
            });
            continue;
        }
        if !free {
            drift_series.entry(record.sensor.clone()).or_default().push(t);
        }
        let key = (k, record.sensor.clone());
        match chosen.get_mut(&key) {
            None => {
                chosen.insert(key, Candidate { record, abs_delta });
            }
            Some(current) => {
                // Input is sorted, so on equal distance the incumbent is the earlier record.
                let (kept, lost) = if abs_delta < current.abs_delta {
                    let old = std::mem::replace(current, Candidate { record, abs_delta });
                    (current.record.timestamp(), old.record)
                } else {
                    (current.record.timestamp(), record)
                };
                report.duplicates.push(Duplicate {
                    timestamp: lost.timestamp(),
                    sensor: lost.sensor,
                    frame_index: k,
                    kept_timestamp: kept,
                });
            }
        }
    }

    let mut frames: BTreeMap<u64, Frame> = BTreeMap::new();
    for ((k, sensor), c) in chosen {
        let delta = c.record.timestamp() as i64 - trigger.trigger_time(k) as i64;
        if cfg.free_running.contains(&sensor) {
            report.free_running_offsets.push(FreeRunningOffset {
                sensor: sensor.clone(),
                frame_index: k,
                delta_ns: delta,
            });
        }
        let record = match c.record.payload {
            RawPayload::Image(i) => SensorRecord::Image(i),
            RawPayload::Cloud(p) => SensorRecord::Cloud(p),
            RawPayload::Ins(_) => unreachable!("INS samples are windowed, not chosen"),
        };
        frame_at(&mut frames, trigger, k).records.insert(sensor, record);
        report.assigned += 1;
    }
    for ((k, sensor), block) in ins_blocks {
        frame_at(&mut frames, trigger, k).insert_ins(sensor, block);
    }

    for f in frames.values_mut() {
        let missing: Vec<SensorId> = cfg
            .required
            .iter()
            .filter(|s| !f.records.contains_key(*s))
            .cloned()
            .collect();
        if !missing.is_empty() {
            f.missing.extend(missing.iter().cloned());
            report.incomplete_frames.push(IncompleteFrame {
                frame_index: f.index,
                missing,
            });
        }
    }
    report.frames_built = frames.len();

    for (sensor, series) in drift_series {
        if let Ok(drift_ppm) = drift_ppm(&series, trigger) {
            report.drift.push(DriftEstimate {
                sensor,
                drift_ppm,
                samples: series.len(),
            });
        }
    }
    Ok((frames.into_values().collect(), report))
}

fn frame_at<'a>(frames: &'a mut BTreeMap<u64, Frame>, trigger: &TriggerModel, k: u64) -> &'a mut Frame {
    frames.entry(k).or_insert_with(|| Frame::new(k, trigger.trigger_time(k)))
}

/// Clock drift of one sensor: least-squares slope of `t − nearest trigger`
/// against the trigger index, in parts per million of the period.
pub fn drift_ppm(timestamps: &[u64], trigger: &TriggerModel) -> Result<f64, AssembleError> {
    trigger.validate()?;
    if timestamps.len() < MIN_DRIFT_SAMPLES {
        return Err(AssembleError::InsufficientSamples(timestamps.len()));
    }
    let samples: Vec<(f64, f64)> = timestamps
        .iter()
        .map(|&t| {
            let (k, delta) = trigger.nearest(t);
            (k as f64, delta as f64)
        })
        .collect();
    let n = samples.len() as f64;
    let mean_k = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_r = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(k, r) in &samples {
        sxy += (k - mean_k) * (r - mean_r);
        sxx += (k - mean_k) * (k - mean_k);
    }
    if sxx == 0.0 {
        return Err(AssembleError::InsufficientSamples(timestamps.len()));
    }
    Ok(sxy / sxx / trigger.period_ns as f64 * 1e6)
}

/// [`drift_ppm`] for several sensors at once.
pub fn drift_report(
    series: &BTreeMap<SensorId, Vec<u64>>,
    trigger: &TriggerModel,
) -> Result<BTreeMap<SensorId, f64>, AssembleError> {
    series
        .iter()
        .map(|(id, ts)| Ok((id.clone(), drift_ppm(ts, trigger)?)))
        .collect()
}

/// Splits frames back into raw records, e.g. to build assembler inputs from
/// an existing dataset. Output is sorted by timestamp.
pub fn flatten_frames<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for f in frames {
        for (sensor, rec) in &f.records {
            match rec {
                SensorRecord::Image(i) => out.push(RawRecord {
                    sensor: sensor.clone(),
                    payload: RawPayload::Image(i.clone()),
                }),
                SensorRecord::Cloud(c) => out.push(RawRecord {
                    sensor: sensor.clone(),
                    payload: RawPayload::Cloud(c.clone()),
                }),
                SensorRecord::InsBlock(b) => out.extend(b.iter().map(|r| RawRecord {
                    sensor: sensor.clone(),
                    payload: RawPayload::Ins(r.clone()),
                })),
            }
        }
    }
    out.sort_by_key(RawRecord::timestamp);
    out
}
