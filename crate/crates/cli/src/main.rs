use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod convert;
mod error;
mod inspect;
mod project;
mod select;

use error::{CliError, EXIT_USAGE};

/// Inspect, validate, render and convert .4mse sensor datasets.
#[derive(Debug, Parser)]
#[command(name = "fmse", version)]
struct Cli {
    /// Print canonical JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Format version, sensor registry, frame count and time span.
    Info {
        file: PathBuf,
    },
    /// Recompute every checksum and the file digest. Exits 1 on any mismatch.
    Validate {
        file: PathBuf,
    },
    /// Per-sensor record, point and sample counts over all frames.
    Stats {
        file: PathBuf,
    },
    /// Render LiDAR points over a camera image as a binary PPM.
    Project(project::ProjectArgs),
    /// Write the dataset as a ROS bag (format 2.0).
    Export(convert::ExportArgs),
    /// Group a raw record dump into trigger-aligned frames and write a .4mse file.
    Assemble(convert::AssembleArgs),
    /// Generate a deterministic synthetic dataset or raw record dump.
    Synth(convert::SynthArgs),
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let json = cli.json;
    match cli.command {
        Command::Info { file } => inspect::info(&file, json, stdout),
        Command::Validate { file } => inspect::validate(&file, json, stdout),
        Command::Stats { file } => inspect::stats(&file, json, stdout),
        Command::Project(args) => project::run(&args, json, stdout),
        Command::Export(args) => convert::export(&args, json, stdout),
        Command::Assemble(args) => convert::assemble(&args, json, stdout),
        Command::Synth(args) => convert::synth(&args, json, stdout),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FMSE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let code = match run(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let _ = lock.flush();
    ExitCode::from(code as u8)
}
