use fmse_core::assemble::AssembleError;
use fmse_core::bag::BagError;
use fmse_core::codec::CodecError;
use fmse_core::geom::GeomError;
use thiserror::Error;

/// Exit status for successful runs.
pub const EXIT_OK: i32 = 0;
/// A checksum or digest did not match.
pub const EXIT_INTEGRITY: i32 = 1;
/// Bad arguments, unreadable input or any other failure.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Bag(#[from] BagError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let integrity = match self {
            CliError::Codec(e) => e.is_integrity_failure(),
            CliError::Bag(BagError::Codec(e)) => e.is_integrity_failure(),
            _ => false,
        };
        if integrity {
            EXIT_INTEGRITY
        } else {
            EXIT_USAGE
        }
    }
}

pub fn io_err(path: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.to_string();
    move |source| CliError::Io { path, source }
}

pub fn json_err(path: impl std::fmt::Display) -> impl FnOnce(serde_json::Error) -> CliError {
    let path = path.to_string();
    move |source| CliError::Json { path, source }
}
