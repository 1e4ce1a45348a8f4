use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use fmse_core::assemble::{self as asm, flatten_frames, AssemblyConfig, RawPayload, RawRecord, TriggerModel};
use fmse_core::bag::{export_bag, TopicMap};
use fmse_core::codec::write_dataset;
use fmse_core::fixtures::{self, FrameShape};
use fmse_core::model::{DatasetMeta, Modality, SensorId, SensorRecord};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{io_err, json_err, CliError, EXIT_OK};
use crate::inspect::{emit_json, open_file, say};
use crate::select::{self, AgentArg};

#[derive(Debug, Args)]
pub struct ExportArgs {
    file: PathBuf,
    /// Output bag path.
    #[arg(long)]
    bag: PathBuf,
    /// JSON topic overrides: {"topics": {"AGENT/NAME": "/topic" | null}, "calibration_topic": "/tf" | null}.
    #[arg(long)]
    topics: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicOverrides {
    #[serde(default)]
    topics: BTreeMap<String, Option<String>>,
    #[serde(default, deserialize_with = "present")]
    calibration_topic: Option<Option<String>>,
}

/// Distinguishes an explicit `null` from an absent field.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<String>>, D::Error> {
    Option::<String>::deserialize(d).map(Some)
}

fn topic_map(meta: &DatasetMeta, overrides: Option<&Path>) -> Result<TopicMap, CliError> {
    let mut map = TopicMap::defaults(meta)?;
    let Some(path) = overrides else {
        return Ok(map);
    };
    let bytes = std::fs::read(path).map_err(io_err(path.display()))?;
    let o: TopicOverrides = serde_json::from_slice(&bytes).map_err(json_err(path.display()))?;
    for (key, topic) in o.topics {
        let sensor = select::qualified(meta, &key)?;
        match topic {
            Some(t) => map.set(sensor, t)?,
            None => {
                map.remove(&sensor);
            }
        }
    }
    if let Some(cal) = o.calibration_topic {
        map.set_calibration_topic(cal)?;
    }
    Ok(map)
}

pub fn export(args: &ExportArgs, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = open_file(&args.file)?;
    let topics = topic_map(r.meta(), args.topics.as_deref())?;
    let file = File::create(&args.bag).map_err(io_err(args.bag.display()))?;
    let summary = export_bag(&r, &topics, BufWriter::new(file))?;
    if json {
        emit_json(&summary, out)?;
    } else {
        say!(
            out,
            "wrote {} messages on {} topics in {} chunks ({} bytes) to {}",
            summary.messages,
            summary.per_topic.len(),
            summary.chunks,
            summary.bytes,
            args.bag.display()
        );
        for (topic, n) in &summary.per_topic {
            say!(out, "  {topic:<32} {n}");
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Raw record dump: JSON Lines, the dataset meta on the first line and one record per following line.
    dump: PathBuf,
    /// Output .4mse path.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = asm::DEFAULT_PERIOD_NS)]
    period_ns: u64,
    /// Time of trigger 0. Defaults to the first camera or LiDAR timestamp rounded to a whole period.
    #[arg(long)]
    phase_ns: Option<u64>,
    #[arg(long, default_value_t = asm::DEFAULT_TOLERANCE_NS)]
    tolerance_ns: u64,
    /// Sensors that are not triggered and attach to the nearest trigger (repeatable).
    #[arg(long = "free-running")]
    free_running: Vec<String>,
    /// Sensors every frame should contain (repeatable). Defaults to the whole registry.
    #[arg(long = "required")]
    required: Vec<String>,
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,
}

fn read_dump(path: &Path) -> Result<(DatasetMeta, Vec<RawRecord>), CliError> {
    let file = File::open(path).map_err(io_err(path.display()))?;
    let lines = BufReader::new(file).lines().enumerate();
    let mut meta = None;
    let mut records = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(io_err(path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), n + 1);
        if meta.is_none() {
            meta = Some(serde_json::from_str::<DatasetMeta>(&line).map_err(json_err(at))?);
        } else {
            records.push(serde_json::from_str::<RawRecord>(&line).map_err(json_err(at))?);
        }
    }
    let meta = meta.ok_or_else(|| CliError::Usage(format!("{}: empty dump", path.display())))?;
    Ok((meta, records))
}

fn round_to_period(t: u64, period: u64) -> u64 {
    (t + period / 2) / period * period
}

pub fn assemble(args: &AssembleArgs, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let (meta, records) = read_dump(&args.dump)?;
    let phase = match args.phase_ns {
        Some(p) => p,
        None => {
            let first = records
                .iter()
                .filter(|r| !matches!(r.payload, RawPayload::Ins(_)))
                .chain(records.iter())
                .map(RawRecord::timestamp)
                .next()
                .unwrap_or(0);
            round_to_period(first, args.period_ns.max(1))
        }
    };
    let trigger = TriggerModel {
        period_ns: args.period_ns,
        phase_ns: phase,
        ..TriggerModel::default()
    };
    let resolve = |names: &[String]| -> Result<BTreeSet<SensorId>, CliError> {
        names.iter().map(|n| select::sensor(&meta, args.agent, n)).collect()
    };
    let cfg = AssemblyConfig {
        tolerance_ns: args.tolerance_ns,
        free_running: resolve(&args.free_running)?,
        required: if args.required.is_empty() {
            meta.sensor_registry.iter().map(|s| s.id.clone()).collect()
        } else {
            resolve(&args.required)?
        },
    };
    log::info!("assembling {} records with trigger phase {phase} ns", records.len());
    let (frames, report) = asm::assemble(records, &trigger, &cfg)?;
    let file = File::create(&args.out).map_err(io_err(args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_dataset(&meta, &frames, &mut w)?;
    w.flush().map_err(io_err(args.out.display()))?;

    if json {
        emit_json(&report, out)?;
        return Ok(EXIT_OK);
    }
    say!(out, "frames built: {}", report.frames_built);
    say!(out, "records assigned: {} of {}", report.assigned, report.total_records);
    say!(out, "orphans: {}", report.orphans.len());
    for o in &report.orphans {
        say!(out, "  {} at {} ns: {:?}", o.sensor, o.timestamp, o.reason);
    }
    say!(out, "duplicates: {}", report.duplicates.len());
    say!(out, "incomplete frames: {}", report.incomplete_frames.len());
    for d in &report.drift {
        say!(out, "drift {}: {:.3} ppm over {} samples", d.sensor, d.drift_ppm, d.samples);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output path.
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Stored image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "8x6", value_parser = parse_size)]
    image: (u32, u32),
    /// Points per LiDAR cloud.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// INS samples per frame window.
    #[arg(long, default_value_t = 10)]
    ins_samples: usize,
    /// Write a raw record dump (JSON Lines) for `assemble` instead of a .4mse file.
    #[arg(long)]
    raw: bool,
    /// Uniform timestamp jitter of camera and LiDAR records, in ns (raw dumps only).
    #[arg(long, default_value_t = 0, requires = "raw")]
    jitter_ns: u64,
    /// Adds one extra image of the first camera this many ns after the first trigger (raw dumps only).
    #[arg(long, requires = "raw")]
    outlier_ns: Option<u64>,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w: u32 = w.parse().map_err(|e| format!("{e}"))?;
    let h: u32 = h.parse().map_err(|e| format!("{e}"))?;
    if w == 0 || h == 0 {
        return Err("image size must be non-zero".into());
    }
    Ok((w, h))
}

#[derive(Serialize)]
struct SynthSummary {
    frames: usize,
    records: usize,
    bytes: u64,
}

pub fn synth(args: &SynthArgs, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let shape = FrameShape {
        image: args.image,
        points: args.points,
        ins_samples: args.ins_samples,
    };
    let (meta, frames) = fixtures::dataset(args.frames, &shape, args.seed);
    let file = File::create(&args.out).map_err(io_err(args.out.display()))?;
    let mut w = BufWriter::new(file);
    let records = if args.raw {
        let mut rng = fixtures::rng(args.seed ^ 0x5eed);
        let mut raw = flatten_frames(&frames);
        if args.jitter_ns > 0 {
            let j = args.jitter_ns as i64;
            for r in &mut raw {
                let t = match &mut r.payload {
                    RawPayload::Image(i) => &mut i.timestamp,
                    RawPayload::Cloud(c) => &mut c.frame_timestamp,
                    RawPayload::Ins(_) => continue,
                };
                *t = (*t as i64 + rng.gen_range(-j..=j)) as u64;
            }
        }
        if let Some(offset) = args.outlier_ns {
            let camera = meta
                .sensor_registry
                .iter()
                .find(|s| s.id.modality == Modality::Camera)
                .map(|s| s.id.clone())
                .ok_or_else(|| CliError::Usage("registry has no camera".into()))?;
            let mut rng = fixtures::rng(args.seed);
            let t = fixtures::BASE_TIMESTAMP + offset;
            if let SensorRecord::Image(mut img) = fixtures::record_for(&camera, t, &shape, &mut rng) {
                img.timestamp = t;
                raw.push(RawRecord {
                    sensor: camera,
                    payload: RawPayload::Image(img),
                });
            }
        }
        raw.sort_by_key(RawRecord::timestamp);
        let line = |w: &mut BufWriter<File>, bytes: Vec<u8>| -> Result<(), CliError> {
            w.write_all(&bytes).and_then(|_| w.write_all(b"\n")).map_err(io_err(args.out.display()))
        };
        line(&mut w, serde_json::to_vec(&meta).expect("meta serializes"))?;
        for r in &raw {
            line(&mut w, serde_json::to_vec(r).expect("records serialize"))?;
        }
        raw.len()
    } else {
        write_dataset(&meta, &frames, &mut w)?;
        frames.iter().map(|f| f.records.len()).sum()
    };
    w.flush().map_err(io_err(args.out.display()))?;
    let bytes = std::fs::metadata(&args.out).map_err(io_err(args.out.display()))?.len();
    let summary = SynthSummary {
        frames: args.frames,
        records,
        bytes,
    };
    if json {
        emit_json(&summary, out)?;
    } else {
        say!(out, "wrote {} frames ({} records, {} bytes) to {}", summary.frames, summary.records, summary.bytes, args.out.display());
    }
    Ok(EXIT_OK)
}
