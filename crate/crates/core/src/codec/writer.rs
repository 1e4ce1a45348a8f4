use std::io::{self, Write};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::model::{DatasetMeta, FormatVersion, Frame};

use super::layout::*;
use super::payload::{encode_index, encode_record, FrameStart};
use super::{canonical_json, CodecError};

#[derive(Clone, Debug, Default)]
pub struct WriteOptions {
    /// Version stamped into the header and meta block.
    pub version: FormatVersion,
    /// Additional top-level meta keys. Readers ignore keys they do not know,
    /// which is how minor versions add fields.
    pub extra_meta: Map<String, Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WriteSummary {
    pub frames_written: u64,
    pub bytes_written: u64,
}

/// Counts bytes and hashes everything that passes through.
struct HashingSink<W> {
    inner: W,
    hasher: Sha256,
    written: u64,
}

impl<W: Write> HashingSink<W> {
    fn put(&mut self, b: &[u8]) -> io::Result<()> {
        self.inner.write_all(b)?;
        self.hasher.update(b);
        self.written += b.len() as u64;
        Ok(())
    }

    fn put_record(&mut self, header: &RecordHeader, payload: &[u8]) -> io::Result<()> {
        self.put(&header.encode())?;
        self.put(payload)
    }
}

/// Streaming `.4mse` writer. Frames go out as they are handed in; only the
/// index (24 bytes per frame) is held until [`finish`](Self::finish).
pub struct DatasetWriter<W: Write> {
    sink: HashingSink<W>,
    meta: DatasetMeta,
    index: Vec<IndexEntry>,
    last_frame: Option<u64>,
    scratch: Vec<u8>,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(meta: DatasetMeta, sink: W) -> Result<Self, CodecError> {
        Self::with_options(meta, sink, WriteOptions::default())
    }

    pub fn with_options(mut meta: DatasetMeta, sink: W, options: WriteOptions) -> Result<Self, CodecError> {
        meta.validate()?;
        meta.format_version = options.version;
        let mut doc = serde_json::to_value(&meta).map_err(|e| CodecError::InvalidMeta(e.to_string()))?;
        let obj = doc.as_object_mut().expect("meta serializes to an object");
        for (k, v) in options.extra_meta {
            if obj.contains_key(&k) {
                return Err(CodecError::InvalidMeta(format!("extra meta key {k:?} shadows a core field")));
            }
            obj.insert(k, v);
        }
        let meta_bytes = canonical_json(&doc).map_err(|e| CodecError::InvalidMeta(e.to_string()))?;
        let header = FileHeader {
            version: options.version,
            meta_length: meta_bytes.len() as u64,
            meta_checksum: crc32c::crc32c(&meta_bytes),
        };
        let mut sink = HashingSink {
            inner: sink,
            hasher: Sha256::new(),
            written: 0,
        };
        sink.put(&header.encode()).map_err(CodecError::Io)?;
        sink.put(&meta_bytes).map_err(CodecError::Io)?;
        Ok(Self {
            sink,
            meta,
            index: Vec::new(),
            last_frame: None,
            scratch: Vec::new(),
        })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), CodecError> {
        if let Some(previous) = self.last_frame {
            if frame.index <= previous {
                return Err(CodecError::OrderViolation {
                    previous,
                    got: frame.index,
                });
            }
        }
        self.meta.check_frame(frame)?;
        let meta = &self.meta;
        let id_of = |id| meta.sensor_index(id).expect("checked against registry");
        let missing: Vec<u16> = frame.missing.iter().map(id_of).collect();
        let sensor_ids: Vec<u16> = frame.records.keys().map(id_of).collect();

        let offset = self.sink.written;
        let start = FrameStart {
            frame_index: frame.index,
            reference_timestamp: frame.reference_timestamp,
            payload_count: frame.records.len() as u32,
            missing,
        }
        .encode();
        let io = CodecError::Io;
        self.sink
            .put_record(&RecordHeader::new(RecordKind::FrameStart, &start), &start)
            .map_err(io)?;

        for (record, sensor_id) in frame.records.values().zip(sensor_ids) {
            self.scratch.clear();
            let payload_type = encode_record(record, &mut self.scratch);
            if self.scratch.len() as u64 >= MAX_PAYLOAD_LEN {
                return Err(CodecError::InvalidRecord(format!(
                    "payload of {} bytes exceeds the v1 record bound",
                    self.scratch.len()
                )));
            }
            let mut header = RecordHeader::new(RecordKind::SensorPayload, &self.scratch);
            header.payload_type = payload_type;
            header.sensor_id = sensor_id;
            self.sink.put_record(&header, &self.scratch).map_err(io)?;
        }
        // Drop oversized scratch space so one huge frame does not pin memory.
        if self.scratch.capacity() > 64 << 20 {
            self.scratch = Vec::new();
        }

        let end = frame.index.to_le_bytes();
        self.sink
            .put_record(&RecordHeader::new(RecordKind::FrameEnd, &end), &end)
            .map_err(io)?;

        self.index.push(IndexEntry {
            frame_index: frame.index,
            byte_offset: offset,
            reference_timestamp: frame.reference_timestamp,
        });
        self.last_frame = Some(frame.index);
        Ok(())
    }

    /// Writes the index and footer, flushes, and hands the sink back.
    pub fn finish(mut self) -> Result<(WriteSummary, W), CodecError> {
        let io = CodecError::Io;
        let index_offset = self.sink.written;
        let index = encode_index(&self.index);
        self.sink
            .put_record(&RecordHeader::new(RecordKind::Index, &index), &index)
            .map_err(io)?;

        let footer = Footer {
            index_offset,
            frame_count: self.index.len() as u64,
            file_digest: self.sink.hasher.finalize_reset().into(),
        }
        .encode();
        self.sink
            .put_record(&RecordHeader::new(RecordKind::Footer, &footer), &footer)
            .map_err(io)?;
        self.sink.inner.flush().map_err(io)?;
        let summary = WriteSummary {
            frames_written: self.index.len() as u64,
            bytes_written: self.sink.written,
        };
        Ok((summary, self.sink.inner))
    }
}

/// Writes a complete file: header, meta, every frame, index and footer.
pub fn write_dataset<'a, W: Write>(
    meta: &DatasetMeta,
    frames: impl IntoIterator<Item = &'a Frame>,
    sink: W,
) -> Result<WriteSummary, CodecError> {
    write_dataset_with(meta, frames, sink, WriteOptions::default())
}

pub fn write_dataset_with<'a, W: Write>(
    meta: &DatasetMeta,
    frames: impl IntoIterator<Item = &'a Frame>,
    sink: W,
    options: WriteOptions,
) -> Result<WriteSummary, CodecError> {
    let mut w = DatasetWriter::with_options(meta.clone(), sink, options)?;
    for f in frames {
        w.write_frame(f)?;
    }
    Ok(w.finish()?.0)
}
