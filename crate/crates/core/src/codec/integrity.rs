use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::model::DatasetMeta;

use super::layout::*;
use super::payload::FrameStart;
use super::{Checksum, ChecksumFailure, CodecError};

const CHUNK: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntegrityReport {
    /// True exactly when `failures` is empty.
    pub ok: bool,
    pub frames_checked: u64,
    pub failures: Vec<ChecksumFailure>,
}

/// Sequentially recomputes every record CRC and the file digest.
///
/// `hasher` already covers the bytes before `pos`. `frames_at` maps
/// FRAME_START offsets to frame indices (from the index) so a frame whose
/// FRAME_START payload is damaged is still named correctly.
pub(super) fn scan<R: Read>(
    mut r: R,
    mut hasher: Sha256,
    mut pos: u64,
    meta: &DatasetMeta,
    frames_at: Option<BTreeMap<u64, u64>>,
) -> Result<IntegrityReport, CodecError> {
    let mut failures = Vec::new();
    let mut frames_checked = 0u64;
    let mut current_frame: Option<u64> = None;
    let mut buf = vec![0u8; CHUNK];

    if pos == 0 {
        // Seekable sources rescan header and meta so the digest covers them.
        let mut hb = [0u8; FILE_HEADER_LEN];
        read_exact(&mut r, &mut hb, 0)?;
        let header = FileHeader::decode(&hb)?;
        hasher.update(hb);
        pos = FILE_HEADER_LEN as u64;
        let (crc, next) = crc_stream(&mut r, &mut hasher, &mut buf, pos, header.meta_length)?;
        if crc != header.meta_checksum {
            failures.push(ChecksumFailure {
                record: "META",
                offset: 0,
                frame_index: None,
                sensor: None,
                expected_checksum: Checksum::Crc32c(header.meta_checksum),
                actual_checksum: Checksum::Crc32c(crc),
            });
        }
        pos = next;
    }

    let mut seen_index = false;
    loop {
        let at = pos;
        let mut hb = [0u8; RECORD_HEADER_LEN];
        read_exact(&mut r, &mut hb, at)?;
        let h = RecordHeader::decode(&hb, at)?;
        pos += RECORD_HEADER_LEN as u64;
        let digest_before: [u8; 32] = hasher.clone().finalize().into();
        hasher.update(hb);

        let failure = |actual: u32, frame_index, sensor| ChecksumFailure {
            record: h.kind.name(),
            offset: at,
            frame_index,
            sensor,
            expected_checksum: Checksum::Crc32c(h.payload_checksum),
            actual_checksum: Checksum::Crc32c(actual),
        };
        let structural = |what: String| CodecError::Malformed { offset: at, what };

        match h.kind {
            RecordKind::FrameStart => {
                if seen_index || current_frame.is_some() {
                    return Err(structural("FRAME_START out of place".into()));
                }
                if h.payload_length > (FRAME_START_FIXED_LEN + 2 * u16::MAX as usize) as u64 {
                    return Err(structural("FRAME_START payload is implausibly long".into()));
                }
                let mut b = vec![0u8; h.payload_length as usize];
                read_exact(&mut r, &mut b, pos)?;
                hasher.update(&b);
                pos += h.payload_length;
                frames_checked += 1;
                let actual = crc32c::crc32c(&b);
                let decoded = (actual == h.payload_checksum)
                    .then(|| FrameStart::decode(&b).ok())
                    .flatten()
                    .map(|s| s.frame_index);
                let index = match &frames_at {
                    Some(map) => map.get(&at).copied(),
                    None => decoded,
                };
                // A frame is open until its FRAME_END, even when its number is unknown.
                current_frame = Some(index.unwrap_or(u64::MAX));
                if actual != h.payload_checksum {
                    failures.push(failure(actual, index, None));
                }
            }
            RecordKind::SensorPayload => {
                let Some(frame) = current_frame else {
                    return Err(structural("sensor payload outside a frame".into()));
                };
                let (actual, next) = crc_stream(&mut r, &mut hasher, &mut buf, pos, h.payload_length)?;
                pos = next;
                if actual != h.payload_checksum {
                    let sensor = meta.sensor_at(h.sensor_id).cloned();
                    failures.push(failure(actual, (frame != u64::MAX).then_some(frame), sensor));
                }
            }
            RecordKind::FrameEnd => {
                let Some(frame) = current_frame.take() else {
                    return Err(structural("FRAME_END outside a frame".into()));
                };
                let (actual, next) = crc_stream(&mut r, &mut hasher, &mut buf, pos, h.payload_length)?;
                pos = next;
                if actual != h.payload_checksum {
                    failures.push(failure(actual, (frame != u64::MAX).then_some(frame), None));
                }
            }
            RecordKind::Index => {
                if seen_index || current_frame.is_some() {
                    return Err(structural("INDEX out of place".into()));
                }
                seen_index = true;
                let (actual, next) = crc_stream(&mut r, &mut hasher, &mut buf, pos, h.payload_length)?;
                pos = next;
                if actual != h.payload_checksum {
                    failures.push(failure(actual, None, None));
                }
            }
            RecordKind::Footer => {
                if !seen_index {
                    return Err(structural("FOOTER before the index".into()));
                }
                if h.payload_length != FOOTER_PAYLOAD_LEN as u64 {
                    return Err(structural("footer has the wrong length".into()));
                }
                let mut b = [0u8; FOOTER_PAYLOAD_LEN];
                read_exact(&mut r, &mut b, pos)?;
                pos += FOOTER_PAYLOAD_LEN as u64;
                let actual = crc32c::crc32c(&b);
                if actual != h.payload_checksum {
                    failures.push(failure(actual, None, None));
                } else if let Some(footer) = Footer::decode(&b) {
                    // The digest covers every record, so it only adds information
                    // when no individual record has been blamed.
                    if footer.file_digest != digest_before && failures.is_empty() {
                        failures.push(ChecksumFailure {
                            record: "FILE",
                            offset: 0,
                            frame_index: None,
                            sensor: None,
                            expected_checksum: Checksum::Sha256(footer.file_digest),
                            actual_checksum: Checksum::Sha256(digest_before),
                        });
                    }
                } else {
                    return Err(structural("footer lacks its trailing magic".into()));
                }
                let mut probe = [0u8; 1];
                if r.read(&mut probe)? != 0 {
                    return Err(CodecError::Malformed {
                        offset: pos,
                        what: "bytes after the footer".into(),
                    });
                }
                break;
            }
        }
    }

    Ok(IntegrityReport {
        ok: failures.is_empty(),
        frames_checked,
        failures,
    })
}

fn read_exact<R: Read>(r: &mut R, b: &mut [u8], at: u64) -> Result<(), CodecError> {
    r.read_exact(b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CodecError::Truncated(format!("file ends inside the record at byte {at}")),
        _ => CodecError::Io(e),
    })
}

/// CRC-32C of the next `len` bytes, fed through `hasher` as well.
fn crc_stream<R: Read>(
    r: &mut R,
    hasher: &mut Sha256,
    buf: &mut [u8],
    pos: u64,
    len: u64,
) -> Result<(u32, u64), CodecError> {
    let mut crc = 0u32;
    let mut left = len;
    while left > 0 {
        let n = left.min(buf.len() as u64) as usize;
        read_exact(r, &mut buf[..n], pos)?;
        crc = crc32c::crc32c_append(crc, &buf[..n]);
        hasher.update(&buf[..n]);
        left -= n as u64;
    }
    Ok((crc, pos + len))
}
