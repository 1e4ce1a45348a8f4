use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use fmse_core::calib::CalibrationGraph;
use fmse_core::geom::{colorize_depth, colorize_depth_range, draw_overlay, project_cloud, write_ppm, ProjectedPoint};
use fmse_core::model::{Agent, Modality, SensorId};
use serde::Serialize;

use crate::error::{io_err, CliError, EXIT_OK};
use crate::inspect::{emit_json, open_file, say};
use crate::select::{self, AgentArg};

#[derive(Debug, Args)]
pub struct ProjectArgs {
    file: PathBuf,
    /// Frame index (as stored in the frame, not its position in the file).
    #[arg(long)]
    frame: u64,
    /// Camera token, e.g. STEREO_LEFT or VEHICLE/STEREO_LEFT.
    #[arg(long)]
    camera: String,
    /// LiDAR tokens to merge; defaults to every LiDAR of the camera's agent in the frame.
    #[arg(long = "lidar")]
    lidars: Vec<String>,
    /// Agent used to resolve tokens without a prefix.
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,
    /// Output PPM path.
    #[arg(long, short)]
    out: PathBuf,
    /// Dot radius in pixels.
    #[arg(long, default_value_t = 1)]
    radius: u32,
    /// Depth mapped to yellow; defaults to the 1st percentile of drawn depths.
    #[arg(long, requires = "far")]
    near: Option<f64>,
    /// Depth mapped to black; defaults to the 99th percentile of drawn depths.
    #[arg(long, requires = "near")]
    far: Option<f64>,
    /// Apply the camera's lens distortion (for unrectified images).
    #[arg(long)]
    distort: bool,
}

#[derive(Serialize)]
struct ProjectSummary {
    frame: u64,
    camera: String,
    width: u32,
    height: u32,
    points: Vec<(String, usize)>,
    drawn: usize,
}

pub fn run(args: &ProjectArgs, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = open_file(&args.file)?;
    let meta = r.meta().clone();
    let camera = select::sensor(&meta, args.agent, &args.camera)?;
    if camera.modality != Modality::Camera {
        return Err(CliError::Usage(format!("{camera} is not a camera")));
    }
    let intrinsics = meta
        .intrinsics
        .get(&camera)
        .ok_or_else(|| CliError::Usage(format!("no intrinsics for {camera}")))?;
    let position = r
        .index()
        .iter()
        .position(|e| e.frame_index == args.frame)
        .ok_or_else(|| CliError::Usage(format!("no frame with index {}", args.frame)))?;
    let frame = r.get_frame(position as u64)?;

    let lidars: Vec<SensorId> = if args.lidars.is_empty() {
        frame
            .records
            .keys()
            .filter(|s| s.modality == Modality::Lidar && s.agent == camera.agent)
            .cloned()
            .collect()
    } else {
        let agent = args.agent.or(Some(match camera.agent {
            Agent::Vehicle => AgentArg::Vehicle,
            Agent::Tower => AgentArg::Tower,
        }));
        args.lidars
            .iter()
            .map(|l| select::sensor(&meta, agent, l))
            .collect::<Result<_, _>>()?
    };

    let image = frame
        .get(&camera)
        .and_then(|r| r.as_image())
        .ok_or_else(|| CliError::Usage(format!("frame {} has no image from {camera}", args.frame)))?;
    // stored images may be downscaled relative to the calibrated resolution
    let k = intrinsics.scaled_to(image.width, image.height);
    let graph = CalibrationGraph::load_from_meta(&meta).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut projected: Vec<ProjectedPoint> = Vec::new();
    let mut per_lidar = Vec::new();
    for lidar in &lidars {
        if lidar.modality != Modality::Lidar {
            return Err(CliError::Usage(format!("{lidar} is not a LiDAR")));
        }
        let cloud = frame
            .get(lidar)
            .and_then(|r| r.as_cloud())
            .ok_or_else(|| CliError::Usage(format!("frame {} has no cloud from {lidar}", args.frame)))?;
        let t = graph
            .transform_between(&camera, lidar)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let pts = project_cloud(cloud, &t, &k, args.distort);
        log::info!("{lidar}: {} of {} points in view", pts.len(), cloud.len());
        per_lidar.push((lidar.to_string(), pts.len()));
        projected.extend(pts);
    }

    let mut rgb = image.to_rgb();
    if !projected.is_empty() {
        let depths: Vec<f64> = projected.iter().map(|p| p.depth).collect();
        let colors = match (args.near, args.far) {
            (Some(near), Some(far)) => colorize_depth_range(&depths, near, far)?,
            _ => colorize_depth(&depths)?,
        };
        draw_overlay(&mut rgb, image.width, image.height, &projected, &colors, args.radius);
    }
    let file = File::create(&args.out).map_err(io_err(args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_ppm(&mut w, image.width, image.height, &rgb)?;
    w.flush().map_err(io_err(args.out.display()))?;

    let summary = ProjectSummary {
        frame: args.frame,
        camera: camera.to_string(),
        width: image.width,
        height: image.height,
        drawn: projected.len(),
        points: per_lidar,
    };
    if json {
        emit_json(&summary, out)?;
    } else {
        say!(out, "{} points drawn on {} ({}x{}) -> {}", summary.drawn, summary.camera, summary.width, summary.height, args.out.display());
    }
    Ok(EXIT_OK)
}
