//! The `.4mse` container: streaming writer, streaming and random-access
//! readers, and whole-file integrity validation.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! file header (20 B) | meta block (canonical JSON) |
//! { FRAME_START | SENSOR_PAYLOAD* | FRAME_END }* | INDEX | FOOTER (72 B)
//! ```
//!
//! Every record carries a CRC-32C of its payload; the footer carries the
//! SHA-256 of every byte before it. FORMAT.md at the repository root has the
//! byte-level diagrams.

mod integrity;
pub mod layout;
mod payload;
mod reader;
mod source;
mod writer;

use std::fmt;
use std::io;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{FormatVersion, ModelError, SensorId};

pub use integrity::IntegrityReport;
pub use layout::{IndexEntry, RecordKind};
pub use reader::{open, open_stream, DatasetReader, FrameStream, StreamReader};
pub use source::{AtCursor, ReadAt};
pub use writer::{write_dataset, write_dataset_with, DatasetWriter, WriteOptions, WriteSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Checksum {
    Crc32c(u32),
    Sha256([u8; 32]),
}

impl fmt::Display for Checksum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checksum::Crc32c(v) => write!(f, "crc32c:{v:08x}"),
            Checksum::Sha256(d) => {
                f.write_str("sha256:")?;
                d.iter().try_for_each(|b| write!(f, "{b:02x}"))
            }
        }
    }
}

impl Serialize for Checksum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One record whose stored checksum disagrees with its content.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChecksumFailure {
    /// Record kind (`SENSOR_PAYLOAD`, `FRAME_START`, ...), `META` for the
    /// metadata block or `FILE` for the whole-file digest.
    pub record: &'static str,
    /// Byte offset of the record header (0 for `META` and `FILE`).
    pub offset: u64,
    pub frame_index: Option<u64>,
    pub sensor: Option<SensorId>,
    pub expected_checksum: Checksum,
    pub actual_checksum: Checksum,
}

impl fmt::Display for ChecksumFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} record at byte {}", self.record, self.offset)?;
        if let Some(i) = self.frame_index {
            write!(f, ", frame {i}")?;
        }
        if let Some(s) = &self.sensor {
            write!(f, ", sensor {s}")?;
        }
        write!(f, ": stored {}, computed {}", self.expected_checksum, self.actual_checksum)
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad magic: expected \"4MSE\", found {found:02x?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported major version {0} (this reader handles {major}.x)", major = FormatVersion::CURRENT.major)]
    UnsupportedMajorVersion(FormatVersion),
    #[error("meta checksum mismatch: stored {expected:08x}, computed {actual:08x}")]
    MetaChecksumMismatch { expected: u32, actual: u32 },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("checksum mismatch: {0}")]
    ChecksumMismatch(Box<ChecksumFailure>),
    #[error("registry violation: {0}")]
    RegistryViolation(String),
    #[error("frame order violation: frame {got} written after frame {previous}")]
    OrderViolation { previous: u64, got: u64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid dataset meta: {0}")]
    InvalidMeta(String),
    #[error("frame {index} out of range (frame count {frame_count})")]
    OutOfRange { index: u64, frame_count: u64 },
    #[error("source is not seekable; only streaming access is available")]
    NotSeekable,
    #[error("malformed file at byte {offset}: {what}")]
    Malformed { offset: u64, what: String },
    #[error("I/O failure: {0}")]
    Io(io::Error),
}

impl CodecError {
    /// Stable upper-case error name.
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::BadMagic { .. } => "BAD_MAGIC",
            CodecError::UnsupportedMajorVersion(_) => "UNSUPPORTED_MAJOR_VERSION",
            CodecError::MetaChecksumMismatch { .. } => "META_CHECKSUM_MISMATCH",
            CodecError::Truncated(_) => "TRUNCATED",
            CodecError::ChecksumMismatch(_) => "CHECKSUM_MISMATCH",
            CodecError::RegistryViolation(_) => "REGISTRY_VIOLATION",
            CodecError::OrderViolation { .. } => "ORDER_VIOLATION",
            CodecError::InvalidRecord(_) => "INVALID_RECORD",
            CodecError::InvalidMeta(_) => "INVALID_META",
            CodecError::OutOfRange { .. } => "OUT_OF_RANGE",
            CodecError::NotSeekable => "NOT_SEEKABLE",
            CodecError::Malformed { .. } => "MALFORMED",
            CodecError::Io(_) => "IO_FAILURE",
        }
    }

    /// Whether the error means stored data disagrees with its checksum.
    pub fn is_integrity_failure(&self) -> bool {
        matches!(
            self,
            CodecError::ChecksumMismatch(_) | CodecError::MetaChecksumMismatch { .. }
        )
    }
}

impl From<io::Error> for CodecError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CodecError::Truncated(e.to_string())
        } else {
            CodecError::Io(e)
        }
    }
}

impl From<ModelError> for CodecError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::RegistryViolation(m) => CodecError::RegistryViolation(m),
            ModelError::InvalidMeta(m) => CodecError::InvalidMeta(m),
            other => CodecError::InvalidRecord(other.to_string()),
        }
    }
}

/// Canonical JSON: sorted object keys, no insignificant whitespace.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    // `Value` maps are ordered by key, so a round trip through it sorts every level.
    let v = serde_json::to_value(value)?;
    serde_json::to_vec(&v)
}
