use std::collections::BTreeSet;
use std::io::{BufReader, Read};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::model::{DatasetMeta, Frame, SensorId};

use super::integrity::{self, IntegrityReport};
use super::layout::*;
use super::payload::{decode_index, decode_record, FrameStart};
use super::source::{AtCursor, ReadAt};
use super::{Checksum, ChecksumFailure, CodecError};

/// Largest allocation made up front for a payload whose length the source
/// cannot vouch for. Longer payloads grow as their bytes actually arrive.
const STREAM_PREALLOC_CAP: u64 = 16 << 20;
const READ_BUFFER: usize = 64 << 10;

/// Sequential record reader that tracks its byte offset.
pub(super) struct RecordReader<R> {
    pub r: R,
    pub pos: u64,
    /// Bytes known to remain in the source, when it can tell.
    pub available: Option<u64>,
}

impl<R: Read> RecordReader<R> {
    pub fn new(r: R, pos: u64, available: Option<u64>) -> Self {
        Self { r, pos, available }
    }

    fn consume(&mut self, n: u64) {
        self.pos += n;
        if let Some(a) = &mut self.available {
            *a = a.saturating_sub(n);
        }
    }

    pub fn read_array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], CodecError> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|e| truncated_or_io(e, self.pos, what))?;
        self.consume(N as u64);
        Ok(b)
    }

    /// Reads a record header, returning it with its offset.
    pub fn header(&mut self) -> Result<(u64, RecordHeader), CodecError> {
        let at = self.pos;
        let b = self.read_array::<RECORD_HEADER_LEN>("record header")?;
        let h = RecordHeader::decode(&b, at)?;
        if self.available.is_some_and(|a| h.payload_length > a) {
            return Err(CodecError::Truncated(format!(
                "{} record at byte {at} declares {} payload bytes past the end of the file",
                h.kind.name(),
                h.payload_length
            )));
        }
        Ok((at, h))
    }

    pub fn payload(&mut self, len: u64) -> Result<Vec<u8>, CodecError> {
        let at = self.pos;
        let mut buf = Vec::new();
        if self.available.is_some() || len <= STREAM_PREALLOC_CAP {
            buf.resize(len as usize, 0);
            self.r
                .read_exact(&mut buf)
                .map_err(|e| truncated_or_io(e, at, "record payload"))?;
        } else {
            let got = (&mut self.r).take(len).read_to_end(&mut buf).map_err(CodecError::Io)?;
            if (got as u64) < len {
                return Err(CodecError::Truncated(format!(
                    "record payload at byte {at} ends after {got} of {len} bytes"
                )));
            }
        }
        self.consume(len);
        Ok(buf)
    }
}

fn truncated_or_io(e: std::io::Error, at: u64, what: &str) -> CodecError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        CodecError::Truncated(format!("{what} at byte {at} runs past the end of the file"))
    } else {
        CodecError::Io(e)
    }
}

fn crc_failure(
    header: &RecordHeader,
    offset: u64,
    actual: u32,
    frame_index: Option<u64>,
    sensor: Option<SensorId>,
) -> CodecError {
    CodecError::ChecksumMismatch(Box::new(ChecksumFailure {
        record: header.kind.name(),
        offset,
        frame_index,
        sensor,
        expected_checksum: Checksum::Crc32c(header.payload_checksum),
        actual_checksum: Checksum::Crc32c(actual),
    }))
}

/// Reads one checksum-verified record payload.
fn verified_payload<R: Read>(
    rr: &mut RecordReader<R>,
    header: &RecordHeader,
) -> Result<Result<Vec<u8>, u32>, CodecError> {
    let payload = rr.payload(header.payload_length)?;
    let actual = crc32c::crc32c(&payload);
    Ok(if actual == header.payload_checksum {
        Ok(payload)
    } else {
        Err(actual)
    })
}

/// Parses header and meta block. Returns the header, the meta and the
/// number of bytes consumed.
fn read_preamble<R: Read>(r: &mut R, hasher: Option<&mut Sha256>) -> Result<(FileHeader, DatasetMeta, u64), CodecError> {
    let mut hb = [0u8; FILE_HEADER_LEN];
    r.read_exact(&mut hb)
        .map_err(|e| truncated_or_io(e, 0, "file header"))?;
    let header = FileHeader::decode(&hb)?;
    let mut meta_bytes = Vec::new();
    let got = r
        .take(header.meta_length)
        .read_to_end(&mut meta_bytes)
        .map_err(CodecError::Io)?;
    if (got as u64) < header.meta_length {
        return Err(CodecError::Truncated(format!(
            "meta block ends after {got} of {} bytes",
            header.meta_length
        )));
    }
    let actual = crc32c::crc32c(&meta_bytes);
    if actual != header.meta_checksum {
        return Err(CodecError::MetaChecksumMismatch {
            expected: header.meta_checksum,
            actual,
        });
    }
    if let Some(h) = hasher {
        h.update(hb);
        h.update(&meta_bytes);
    }
    let mut meta: DatasetMeta =
        serde_json::from_slice(&meta_bytes).map_err(|e| CodecError::InvalidMeta(e.to_string()))?;
    meta.format_version = header.version;
    meta.validate()?;
    Ok((header, meta, FILE_HEADER_LEN as u64 + header.meta_length))
}

/// Random-access reader over a seekable source.
///
/// `get_frame` takes `&self` and reads through positional I/O, so a reader
/// over a `Sync` source can serve several threads at once.
pub struct DatasetReader<S> {
    src: S,
    meta: Arc<DatasetMeta>,
    data_start: u64,
    index_offset: u64,
    index: Vec<IndexEntry>,
    file_len: u64,
}

/// Opens a seekable source: parses and verifies header and meta, then loads
/// the footer and frame index.
pub fn open<S: ReadAt>(src: S) -> Result<DatasetReader<S>, CodecError> {
    let file_len = src.len()?;
    let (_, meta, data_start) = read_preamble(&mut AtCursor::new(&src, 0, file_len), None)?;

    let min_len = data_start + (RECORD_HEADER_LEN + 8 + FOOTER_RECORD_LEN) as u64;
    if file_len < min_len {
        return Err(CodecError::Truncated(format!(
            "{file_len} bytes cannot hold the meta block, an index and a footer"
        )));
    }
    let footer_at = file_len - FOOTER_RECORD_LEN as u64;
    let mut tail = RecordReader::new(AtCursor::new(&src, footer_at, file_len), footer_at, Some(FOOTER_RECORD_LEN as u64));
    let (_, fh) = tail
        .header()
        .map_err(|_| CodecError::Truncated("no footer at the end of the file".into()))?;
    if fh.kind != RecordKind::Footer || fh.payload_length != FOOTER_PAYLOAD_LEN as u64 {
        return Err(CodecError::Truncated("no footer at the end of the file".into()));
    }
    let footer_bytes = verified_payload(&mut tail, &fh)?.map_err(|actual| crc_failure(&fh, footer_at, actual, None, None))?;
    let footer = Footer::decode(&footer_bytes).ok_or_else(|| CodecError::Malformed {
        offset: footer_at,
        what: "footer lacks its trailing magic".into(),
    })?;

    if footer.index_offset < data_start || footer.index_offset >= footer_at {
        return Err(CodecError::Malformed {
            offset: footer_at,
            what: format!("index offset {} outside the frame region", footer.index_offset),
        });
    }
    let mut ir = RecordReader::new(
        AtCursor::new(&src, footer.index_offset, footer_at),
        footer.index_offset,
        Some(footer_at - footer.index_offset),
    );
    let (at, ih) = ir.header()?;
    if ih.kind != RecordKind::Index {
        return Err(CodecError::Malformed {
            offset: at,
            what: format!("footer points at a {} record, not the index", ih.kind.name()),
        });
    }
    let index_bytes = verified_payload(&mut ir, &ih)?.map_err(|actual| crc_failure(&ih, at, actual, None, None))?;
    if ir.pos != footer_at {
        return Err(CodecError::Malformed {
            offset: ir.pos,
            what: "bytes between the index and the footer".into(),
        });
    }
    let index = decode_index(&index_bytes).map_err(|what| CodecError::Malformed { offset: at, what })?;
    if index.len() as u64 != footer.frame_count {
        return Err(CodecError::Malformed {
            offset: footer_at,
            what: format!("footer counts {} frames, index lists {}", footer.frame_count, index.len()),
        });
    }
    if index
        .iter()
        .any(|e| e.byte_offset < data_start || e.byte_offset >= footer.index_offset)
    {
        return Err(CodecError::Malformed {
            offset: at,
            what: "index entry points outside the frame region".into(),
        });
    }

    Ok(DatasetReader {
        src,
        meta: Arc::new(meta),
        data_start,
        index_offset: footer.index_offset,
        index,
        file_len,
    })
}

impl<S: ReadAt> DatasetReader<S> {
    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn frame_count(&self) -> u64 {
        self.index.len() as u64
    }

    pub fn index(&self) -> &[IndexEntry] {
        &self.index
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    /// Offset of the INDEX record, i.e. the end of the last frame.
    pub fn index_offset(&self) -> u64 {
        self.index_offset
    }

    fn cursor_from(&self, offset: u64) -> RecordReader<BufReader<AtCursor<'_, S>>> {
        RecordReader::new(
            BufReader::with_capacity(READ_BUFFER, AtCursor::new(&self.src, offset, self.index_offset)),
            offset,
            Some(self.index_offset - offset),
        )
    }

    /// Frames in file order, each checksum-verified before it is yielded.
    pub fn frames(&self) -> FrameStream<BufReader<AtCursor<'_, S>>> {
        FrameStream {
            rr: self.cursor_from(self.data_start),
            meta: self.meta.clone(),
            end: Some(self.index_offset),
            done: false,
        }
    }

    /// The `position`-th frame of the file, read through the index.
    pub fn get_frame(&self, position: u64) -> Result<Frame, CodecError> {
        let entry = self.index.get(position as usize).ok_or(CodecError::OutOfRange {
            index: position,
            frame_count: self.frame_count(),
        })?;
        let mut rr = self.cursor_from(entry.byte_offset);
        let frame = read_frame(&mut rr, &self.meta, Some(entry.frame_index))?.ok_or_else(|| CodecError::Malformed {
            offset: entry.byte_offset,
            what: "index entry points at the index record".into(),
        })?;
        if frame.index != entry.frame_index {
            return Err(CodecError::Malformed {
                offset: entry.byte_offset,
                what: format!("index names frame {}, record holds frame {}", entry.frame_index, frame.index),
            });
        }
        Ok(frame)
    }

    /// Recomputes every record checksum and the file digest.
    pub fn validate(&self) -> Result<IntegrityReport, CodecError> {
        let frames_at = self.index.iter().map(|e| (e.byte_offset, e.frame_index)).collect();
        integrity::scan(
            BufReader::with_capacity(READ_BUFFER, AtCursor::new(&self.src, 0, self.file_len)),
            Sha256::new(),
            0,
            &self.meta,
            Some(frames_at),
        )
    }
}

/// Forward-only reader over a plain byte stream. The frame count is unknown
/// until the stream has been consumed and random access is unavailable.
pub struct StreamReader<R> {
    r: BufReader<R>,
    meta: Arc<DatasetMeta>,
    hasher: Sha256,
    data_start: u64,
}

pub fn open_stream<R: Read>(r: R) -> Result<StreamReader<R>, CodecError> {
    let mut r = BufReader::with_capacity(READ_BUFFER, r);
    let mut hasher = Sha256::new();
    let (_, meta, data_start) = read_preamble(&mut r, Some(&mut hasher))?;
    Ok(StreamReader {
        r,
        meta: Arc::new(meta),
        hasher,
        data_start,
    })
}

impl<R: Read> StreamReader<R> {
    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Always `None`: a stream does not reveal its length.
    pub fn frame_count(&self) -> Option<u64> {
        None
    }

    pub fn get_frame(&self, _position: u64) -> Result<Frame, CodecError> {
        Err(CodecError::NotSeekable)
    }

    pub fn frames(self) -> FrameStream<BufReader<R>> {
        FrameStream {
            rr: RecordReader::new(self.r, self.data_start, None),
            meta: self.meta,
            end: None,
            done: false,
        }
    }

    pub fn validate(self) -> Result<IntegrityReport, CodecError> {
        integrity::scan(self.r, self.hasher, self.data_start, &self.meta, None)
    }
}

/// Iterator over the frames of a file.
///
/// A checksum mismatch is reported for the frame that contains it and the
/// iterator moves on to the next frame. Structural errors end the iteration.
pub struct FrameStream<R> {
    rr: RecordReader<R>,
    meta: Arc<DatasetMeta>,
    /// Offset of the index record, when known.
    end: Option<u64>,
    done: bool,
}

impl<R: Read> FrameStream<R> {
    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }
}

impl<R: Read> Iterator for FrameStream<R> {
    type Item = Result<Frame, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.end == Some(self.rr.pos) {
            self.done = true;
            return None;
        }
        match read_frame(&mut self.rr, &self.meta, None) {
            Ok(None) => {
                self.done = true;
                None
            }
            Ok(Some(f)) => Some(Ok(f)),
            Err(e) => {
                self.done = !e.is_integrity_failure();
                Some(Err(e))
            }
        }
    }
}

/// Reads one FRAME_START .. FRAME_END group, or `None` on reaching the index.
///
/// After a checksum mismatch the rest of the frame is still consumed, so the
/// reader is left at the next frame boundary.
fn read_frame<R: Read>(
    rr: &mut RecordReader<R>,
    meta: &DatasetMeta,
    expected_index: Option<u64>,
) -> Result<Option<Frame>, CodecError> {
    let (start_at, sh) = rr.header()?;
    match sh.kind {
        RecordKind::FrameStart => {}
        RecordKind::Index => return Ok(None),
        other => {
            return Err(CodecError::Malformed {
                offset: start_at,
                what: format!("expected FRAME_START, found {}", other.name()),
            })
        }
    }
    let mut failure: Option<CodecError> = None;
    let start = match verified_payload(rr, &sh)? {
        Ok(b) => Some(FrameStart::decode(&b).map_err(|what| CodecError::Malformed { offset: start_at, what })?),
        Err(actual) => {
            failure = Some(crc_failure(&sh, start_at, actual, expected_index, None));
            None
        }
    };
    let frame_index = start.as_ref().map(|s| s.frame_index).or(expected_index);
    let mut frame = Frame::new(
        frame_index.unwrap_or_default(),
        start.as_ref().map_or(0, |s| s.reference_timestamp),
    );
    let sensor = |id: u16, at: u64| {
        meta.sensor_at(id).cloned().ok_or_else(|| CodecError::Malformed {
            offset: at,
            what: format!("sensor id {id} is not in the registry"),
        })
    };
    if let Some(s) = &start {
        for &m in &s.missing {
            frame.missing.insert(sensor(m, start_at)?);
        }
    }

    let mut payloads = 0u64;
    loop {
        let (at, h) = rr.header()?;
        match h.kind {
            RecordKind::SensorPayload => {
                payloads += 1;
                let id = sensor(h.sensor_id, at)?;
                let payload = match verified_payload(rr, &h)? {
                    Ok(p) => p,
                    Err(actual) => {
                        failure.get_or_insert_with(|| crc_failure(&h, at, actual, frame_index, Some(id)));
                        continue;
                    }
                };
                if failure.is_some() {
                    continue;
                }
                let record = decode_record(h.payload_type, &id, payload)
                    .map_err(|what| CodecError::Malformed { offset: at, what })?;
                if !record.fits(id.modality) {
                    return Err(CodecError::Malformed {
                        offset: at,
                        what: format!("{} payload for {} sensor {id}", record.kind_name(), id.modality),
                    });
                }
                if frame.records.insert(id.clone(), record).is_some() {
                    return Err(CodecError::Malformed {
                        offset: at,
                        what: format!("second payload for {id} in one frame"),
                    });
                }
            }
            RecordKind::FrameEnd => {
                let end = verified_payload(rr, &h)?;
                let end = match end {
                    Ok(b) => b,
                    Err(actual) => {
                        return Err(failure.unwrap_or_else(|| crc_failure(&h, at, actual, frame_index, None)));
                    }
                };
                if let Some(f) = failure {
                    return Err(f);
                }
                let start = start.expect("set when no failure was recorded");
                if end.len() != FRAME_END_LEN || le_u64(&end) != start.frame_index {
                    return Err(CodecError::Malformed {
                        offset: at,
                        what: format!("FRAME_END does not close frame {}", start.frame_index),
                    });
                }
                if payloads != u64::from(start.payload_count) {
                    return Err(CodecError::Malformed {
                        offset: start_at,
                        what: format!("frame announces {} payloads, holds {payloads}", start.payload_count),
                    });
                }
                let overlap: BTreeSet<_> = frame.missing.iter().filter(|m| frame.records.contains_key(*m)).collect();
                if !overlap.is_empty() {
                    return Err(CodecError::Malformed {
                        offset: start_at,
                        what: "sensor listed as missing also carries a payload".into(),
                    });
                }
                return Ok(Some(frame));
            }
            other => {
                return Err(CodecError::Malformed {
                    offset: at,
                    what: format!("{} record inside frame", other.name()),
                })
            }
        }
    }
}
