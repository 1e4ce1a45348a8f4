//! Byte layout of `.4mse` headers. See FORMAT.md for the normative diagrams.

use crate::model::FormatVersion;

use super::CodecError;

pub const MAGIC: [u8; 4] = *b"4MSE";
pub const FILE_HEADER_LEN: usize = 20;
pub const RECORD_HEADER_LEN: usize = 20;
/// Payload length bound for v1 records.
pub const MAX_PAYLOAD_LEN: u64 = 1 << 32;

pub const FRAME_START_FIXED_LEN: usize = 24;
pub const FRAME_END_LEN: usize = 8;
pub const INDEX_ENTRY_LEN: usize = 24;
pub const FOOTER_PAYLOAD_LEN: usize = 52;
pub const FOOTER_RECORD_LEN: usize = RECORD_HEADER_LEN + FOOTER_PAYLOAD_LEN;

pub const IMAGE_SUBHEADER_LEN: usize = 24;
pub const CLOUD_SUBHEADER_LEN: usize = 16;
pub const POINT_STRIDE: usize = 24;
pub const INS_BLOCK_SUBHEADER_LEN: usize = 8;
pub const INS_RECORD_STRIDE: usize = 112;

pub const FLAG_COMPRESSED: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FileHeader {
    pub version: FormatVersion,
    pub meta_length: u64,
    pub meta_checksum: u32,
}

impl FileHeader {
    pub fn encode(&self) -> [u8; FILE_HEADER_LEN] {
        let mut b = [0u8; FILE_HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.major.to_le_bytes());
        b[6..8].copy_from_slice(&self.version.minor.to_le_bytes());
        b[8..16].copy_from_slice(&self.meta_length.to_le_bytes());
        b[16..20].copy_from_slice(&self.meta_checksum.to_le_bytes());
        b
    }

    /// Parses the fixed header. Checks magic and major version only.
    pub fn decode(b: &[u8; FILE_HEADER_LEN]) -> Result<Self, CodecError> {
        if b[0..4] != MAGIC {
            return Err(CodecError::BadMagic {
                found: [b[0], b[1], b[2], b[3]],
            });
        }
        let version = FormatVersion::new(le_u16(&b[4..6]), le_u16(&b[6..8]));
        if version.major != FormatVersion::CURRENT.major {
            return Err(CodecError::UnsupportedMajorVersion(version));
        }
        Ok(Self {
            version,
            meta_length: le_u64(&b[8..16]),
            meta_checksum: le_u32(&b[16..20]),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    FrameStart = 1,
    SensorPayload = 2,
    FrameEnd = 3,
    Index = 4,
    Footer = 5,
}

impl RecordKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => RecordKind::FrameStart,
            2 => RecordKind::SensorPayload,
            3 => RecordKind::FrameEnd,
            4 => RecordKind::Index,
            5 => RecordKind::Footer,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordKind::FrameStart => "FRAME_START",
            RecordKind::SensorPayload => "SENSOR_PAYLOAD",
            RecordKind::FrameEnd => "FRAME_END",
            RecordKind::Index => "INDEX",
            RecordKind::Footer => "FOOTER",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadType {
    None = 0,
    Image = 1,
    PointCloud = 2,
    InsBlock = 3,
}

impl PayloadType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => PayloadType::None,
            1 => PayloadType::Image,
            2 => PayloadType::PointCloud,
            3 => PayloadType::InsBlock,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordHeader {
    pub kind: RecordKind,
    pub payload_type: PayloadType,
    pub flags: u8,
    pub sensor_id: u16,
    pub payload_length: u64,
    pub payload_checksum: u32,
}

impl RecordHeader {
    pub fn new(kind: RecordKind, payload: &[u8]) -> Self {
        Self {
            kind,
            payload_type: PayloadType::None,
            flags: 0,
            sensor_id: 0,
            payload_length: payload.len() as u64,
            payload_checksum: crc32c::crc32c(payload),
        }
    }

    pub fn encode(&self) -> [u8; RECORD_HEADER_LEN] {
        let mut b = [0u8; RECORD_HEADER_LEN];
        b[0] = self.kind as u8;
        b[1] = self.payload_type as u8;
        b[2] = self.flags;
        b[4..6].copy_from_slice(&self.sensor_id.to_le_bytes());
        b[8..16].copy_from_slice(&self.payload_length.to_le_bytes());
        b[16..20].copy_from_slice(&self.payload_checksum.to_le_bytes());
        b
    }

    /// Structural decode; `offset` is only used for error messages.
    pub fn decode(b: &[u8; RECORD_HEADER_LEN], offset: u64) -> Result<Self, CodecError> {
        let malformed = |what: String| CodecError::Malformed { offset, what };
        let kind = RecordKind::from_u8(b[0]).ok_or_else(|| malformed(format!("unknown record kind {}", b[0])))?;
        let payload_type =
            PayloadType::from_u8(b[1]).ok_or_else(|| malformed(format!("unknown payload type {}", b[1])))?;
        let flags = b[2];
        if flags != 0 {
            return Err(malformed(format!("record flags {flags:#04x} are reserved in v1")));
        }
        if b[3] != 0 || b[6] != 0 || b[7] != 0 {
            return Err(malformed("reserved header bytes are not zero".into()));
        }
        let payload_length = le_u64(&b[8..16]);
        if payload_length >= MAX_PAYLOAD_LEN {
            return Err(malformed(format!("payload length {payload_length} exceeds the v1 bound")));
        }
        let header = Self {
            kind,
            payload_type,
            flags,
            sensor_id: le_u16(&b[4..6]),
            payload_length,
            payload_checksum: le_u32(&b[16..20]),
        };
        let typed = kind == RecordKind::SensorPayload;
        if typed == (payload_type == PayloadType::None) || (!typed && header.sensor_id != 0) {
            return Err(malformed(format!(
                "{} record with payload type {payload_type:?} and sensor {}",
                kind.name(),
                header.sensor_id
            )));
        }
        Ok(header)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub frame_index: u64,
    /// Offset of the frame's FRAME_START record header.
    pub byte_offset: u64,
    pub reference_timestamp: u64,
}

/// Footer payload: index location, frame count and the file digest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Footer {
    pub index_offset: u64,
    pub frame_count: u64,
    pub file_digest: [u8; 32],
}

impl Footer {
    pub fn encode(&self) -> [u8; FOOTER_PAYLOAD_LEN] {
        let mut b = [0u8; FOOTER_PAYLOAD_LEN];
        b[0..8].copy_from_slice(&self.index_offset.to_le_bytes());
        b[8..16].copy_from_slice(&self.frame_count.to_le_bytes());
        b[16..48].copy_from_slice(&self.file_digest);
        b[48..52].copy_from_slice(&MAGIC);
        b
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        if b.len() != FOOTER_PAYLOAD_LEN || b[48..52] != MAGIC {
            return None;
        }
        let mut file_digest = [0u8; 32];
        file_digest.copy_from_slice(&b[16..48]);
        Some(Self {
            index_offset: le_u64(&b[0..8]),
            frame_count: le_u64(&b[8..16]),
            file_digest,
        })
    }
}

pub fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes(b[..2].try_into().unwrap())
}

pub fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

pub fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().unwrap())
}

pub fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes(b[..4].try_into().unwrap())
}

pub fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b[..8].try_into().unwrap())
}
