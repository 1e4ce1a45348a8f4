use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use fmse_core::codec::{canonical_json, open, DatasetReader};
use fmse_core::model::{Agent, SensorRecord, SensorSpec};
use serde::Serialize;

use crate::error::{io_err, CliError, EXIT_INTEGRITY, EXIT_OK};

pub fn open_file(path: &Path) -> Result<DatasetReader<File>, CliError> {
    let file = File::open(path).map_err(io_err(path.display()))?;
    Ok(open(file)?)
}

pub fn emit_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    let mut bytes = canonical_json(value).expect("CLI reports serialize");
    bytes.push(b'\n');
    out.write_all(&bytes).map_err(io_err("stdout"))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(crate::error::io_err("stdout"))?
    };
}
pub(crate) use say;

#[derive(Serialize)]
struct Info<'a> {
    format_version: String,
    data_drop_id: &'a str,
    creation_time: u64,
    agents: &'a [Agent],
    sensors: &'a [SensorSpec],
    frames: u64,
    first_timestamp: Option<u64>,
    last_timestamp: Option<u64>,
    duration_ns: u64,
}

pub fn info(path: &Path, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = open_file(path)?;
    let meta = r.meta();
    let first = r.index().first().map(|e| e.reference_timestamp);
    let last = r.index().last().map(|e| e.reference_timestamp);
    let info = Info {
        format_version: meta.format_version.to_string(),
        data_drop_id: &meta.data_drop_id,
        creation_time: meta.creation_time,
        agents: &meta.agents,
        sensors: &meta.sensor_registry,
        frames: r.frame_count(),
        first_timestamp: first,
        last_timestamp: last,
        duration_ns: last.zip(first).map_or(0, |(l, f)| l - f),
    };
    if json {
        emit_json(&info, out)?;
        return Ok(EXIT_OK);
    }
    say!(out, "format: {}", info.format_version);
    say!(out, "data drop: {}", info.data_drop_id);
    say!(out, "created: {} ns", info.creation_time);
    say!(out, "frames: {}", info.frames);
    say!(out, "duration: {:.3} s", info.duration_ns as f64 * 1e-9);
    say!(out, "sensors: {}", info.sensors.len());
    for s in info.sensors {
        let mut line = format!("  {:<24} {:<7} {}", s.id.to_string(), s.id.modality, s.model);
        if let Some((w, h)) = s.resolution {
            line += &format!("  {w}x{h}");
        }
        if let Some(f) = s.frequency_hz {
            line += &format!("  {f} Hz");
        }
        if let (Some(h), Some(v)) = (s.hfov_deg, s.vfov_deg) {
            line += &format!("  FOV {h}°/{v}°");
        }
        say!(out, "{line}");
    }
    Ok(EXIT_OK)
}

pub fn validate(path: &Path, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = open_file(path)?;
    let report = r.validate()?;
    if json {
        emit_json(&report, out)?;
    } else if report.ok {
        say!(out, "ok: {} frames checked", report.frames_checked);
    } else {
        say!(out, "FAILED: {} of the checked records do not match", report.failures.len());
        for f in &report.failures {
            say!(out, "  {f}");
        }
    }
    Ok(if report.ok { EXIT_OK } else { EXIT_INTEGRITY })
}

#[derive(Default, Serialize)]
struct SensorStats {
    records: u64,
    missing: u64,
    points: u64,
    image_bytes: u64,
    ins_samples: u64,
    first_timestamp: Option<u64>,
    last_timestamp: Option<u64>,
}

#[derive(Serialize)]
struct Stats {
    frames: u64,
    complete_frames: u64,
    sensors: BTreeMap<String, SensorStats>,
}

pub fn stats(path: &Path, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = open_file(path)?;
    let mut stats = Stats {
        frames: 0,
        complete_frames: 0,
        sensors: r
            .meta()
            .sensor_registry
            .iter()
            .map(|s| (s.id.to_string(), SensorStats::default()))
            .collect(),
    };
    for frame in r.frames() {
        let frame = frame?;
        stats.frames += 1;
        if frame.missing.is_empty() && frame.records.len() == r.meta().sensor_registry.len() {
            stats.complete_frames += 1;
        }
        for id in &frame.missing {
            stats.sensors.entry(id.to_string()).or_default().missing += 1;
        }
        for (id, rec) in &frame.records {
            let s = stats.sensors.entry(id.to_string()).or_default();
            s.records += 1;
            match rec {
                SensorRecord::Image(i) => s.image_bytes += i.pixels.len() as u64,
                SensorRecord::Cloud(c) => s.points += c.len() as u64,
                SensorRecord::InsBlock(b) => s.ins_samples += b.len() as u64,
            }
            let ts = rec.timestamps();
            if let (Some(&lo), Some(&hi)) = (ts.iter().min(), ts.iter().max()) {
                s.first_timestamp = Some(s.first_timestamp.map_or(lo, |v| v.min(lo)));
                s.last_timestamp = Some(s.last_timestamp.map_or(hi, |v| v.max(hi)));
            }
        }
    }
    if json {
        emit_json(&stats, out)?;
        return Ok(EXIT_OK);
    }
    say!(out, "frames: {} ({} complete)", stats.frames, stats.complete_frames);
    say!(out, "{:<24} {:>8} {:>8} {:>12} {:>12} {:>8}", "sensor", "records", "missing", "points", "image bytes", "ins");
    for (name, s) in &stats.sensors {
        say!(
            out,
            "{:<24} {:>8} {:>8} {:>12} {:>12} {:>8}",
            name,
            s.records,
            s.missing,
            s.points,
            s.image_bytes,
            s.ins_samples
        );
    }
    Ok(EXIT_OK)
}
