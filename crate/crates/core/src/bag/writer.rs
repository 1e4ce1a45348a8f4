use std::collections::{BTreeMap, HashMap};
use std::io::{Seek, SeekFrom, Write};

use super::messages::{self, split_time, MessageType, StampedTransform};
use super::{frame_id, message_type, BagError, ExportSummary, TopicMap, VERSION_LINE};
use crate::model::{DatasetMeta, Frame, SensorRecord};

/// The bag header record is padded to this many bytes so it can be
/// rewritten in place once the index position is known.
pub const BAG_HEADER_RECORD_LEN: usize = 4096;

const OP_MESSAGE_DATA: u8 = 0x02;
const OP_BAG_HEADER: u8 = 0x03;
const OP_INDEX_DATA: u8 = 0x04;
const OP_CHUNK: u8 = 0x05;
const OP_CHUNK_INFO: u8 = 0x06;
const OP_CONNECTION: u8 = 0x07;

/// Per connection: `(time, offset into the chunk data)` of each message.
type ConnIndex = BTreeMap<u32, Vec<((u32, u32), u32)>>;

pub(super) struct Message {
    pub conn: u32,
    pub time_ns: u64,
    pub data: Vec<u8>,
}

struct Connection {
    topic: String,
    ty: MessageType,
    latching: bool,
    written: bool,
    seq: u32,
}

struct ChunkInfo {
    pos: u64,
    start: (u32, u32),
    end: (u32, u32),
    counts: BTreeMap<u32, u32>,
}

fn field(out: &mut Vec<u8>, name: &str, value: &[u8]) {
    out.extend_from_slice(&((name.len() + 1 + value.len()) as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(b'=');
    out.extend_from_slice(value);
}

fn time_bytes((sec, nsec): (u32, u32)) -> [u8; 8] {
    let mut b = [0u8; 8];
    b[..4].copy_from_slice(&sec.to_le_bytes());
    b[4..].copy_from_slice(&nsec.to_le_bytes());
    b
}

fn record(out: &mut Vec<u8>, header: &[(&str, &[u8])], data: &[u8]) {
    let mut h = Vec::new();
    for (name, value) in header {
        field(&mut h, name, value);
    }
    out.extend_from_slice(&(h.len() as u32).to_le_bytes());
    out.extend_from_slice(&h);
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
}

fn ros_time(ns: u64) -> Result<(u32, u32), BagError> {
    split_time(ns).ok_or(BagError::TimestampOverflow(ns))
}

pub(super) struct BagWriter<W> {
    w: W,
    pos: u64,
    connections: Vec<Connection>,
    by_topic: HashMap<String, u32>,
    chunks: Vec<ChunkInfo>,
    messages: u64,
}

impl<W: Write + Seek> BagWriter<W> {
    pub fn start(mut w: W) -> Result<Self, BagError> {
        w.write_all(VERSION_LINE)?;
        w.write_all(&bag_header(0, 0, 0))?;
        Ok(Self {
            w,
            pos: (VERSION_LINE.len() + BAG_HEADER_RECORD_LEN) as u64,
            connections: Vec::new(),
            by_topic: HashMap::new(),
            chunks: Vec::new(),
            messages: 0,
        })
    }

    /// Connection id for `topic`, registering it on first use.
    pub fn connection(&mut self, topic: &str, ty: MessageType, latching: bool) -> u32 {
        if let Some(&id) = self.by_topic.get(topic) {
            return id;
        }
        let id = self.connections.len() as u32;
        self.connections.push(Connection {
            topic: topic.to_string(),
            ty,
            latching,
            written: false,
            seq: 0,
        });
        self.by_topic.insert(topic.to_string(), id);
        id
    }

    pub fn next_seq(&mut self, conn: u32) -> u32 {
        let c = &mut self.connections[conn as usize];
        let s = c.seq;
        c.seq = c.seq.wrapping_add(1);
        s
    }

    fn connection_record(&self, out: &mut Vec<u8>, id: u32) {
        let c = &self.connections[id as usize];
        let mut data = Vec::new();
        field(&mut data, "topic", c.topic.as_bytes());
        field(&mut data, "type", c.ty.name.as_bytes());
        field(&mut data, "md5sum", c.ty.md5sum.as_bytes());
        field(&mut data, "message_definition", c.ty.definition().as_bytes());
        if c.latching {
            field(&mut data, "latching", b"1");
        }
        record(
            out,
            &[("op", &[OP_CONNECTION]), ("conn", &id.to_le_bytes()), ("topic", c.topic.as_bytes())],
            &data,
        );
    }

    /// Writes one chunk holding `batch` in timestamp order (stable for ties),
    /// followed by its per-connection index records.
    pub fn write_chunk(&mut self, mut batch: Vec<Message>) -> Result<(), BagError> {
        batch.sort_by_key(|m| m.time_ns);
        let mut data = Vec::with_capacity(batch.iter().map(|m| m.data.len() + 64).sum());
        let mut index: ConnIndex = BTreeMap::new();
        for m in &batch {
            if !self.connections[m.conn as usize].written {
                self.connection_record(&mut data, m.conn);
                self.connections[m.conn as usize].written = true;
            }
            let t = ros_time(m.time_ns)?;
            index.entry(m.conn).or_default().push((t, data.len() as u32));
            record(
                &mut data,
                &[("op", &[OP_MESSAGE_DATA]), ("conn", &m.conn.to_le_bytes()), ("time", &time_bytes(t))],
                &m.data,
            );
        }
        let mut out = Vec::with_capacity(data.len() + 256);
        record(
            &mut out,
            &[("op", &[OP_CHUNK]), ("compression", b"none"), ("size", &(data.len() as u32).to_le_bytes())],
            &data,
        );
        drop(data);
        for (conn, entries) in &index {
            let mut d = Vec::with_capacity(entries.len() * 12);
            for (t, offset) in entries {
                d.extend_from_slice(&time_bytes(*t));
                d.extend_from_slice(&offset.to_le_bytes());
            }
            record(
                &mut out,
                &[
                    ("op", &[OP_INDEX_DATA]),
                    ("ver", &1u32.to_le_bytes()),
                    ("conn", &conn.to_le_bytes()),
                    ("count", &(entries.len() as u32).to_le_bytes()),
                ],
                &d,
            );
        }
        self.chunks.push(ChunkInfo {
            pos: self.pos,
            start: ros_time(batch.first().map_or(0, |m| m.time_ns))?,
            end: ros_time(batch.last().map_or(0, |m| m.time_ns))?,
            counts: index.iter().map(|(c, e)| (*c, e.len() as u32)).collect(),
        });
        self.messages += batch.len() as u64;
        self.w.write_all(&out)?;
        self.pos += out.len() as u64;
        Ok(())
    }

    /// Writes connection and chunk-info records, then patches the bag header.
    pub fn finish(mut self) -> Result<ExportSummary, BagError> {
        let index_pos = self.pos;
        let mut out = Vec::new();
        for id in 0..self.connections.len() as u32 {
            self.connection_record(&mut out, id);
        }
        for c in &self.chunks {
            let mut d = Vec::new();
            for (conn, n) in &c.counts {
                d.extend_from_slice(&conn.to_le_bytes());
                d.extend_from_slice(&n.to_le_bytes());
            }
            record(
                &mut out,
                &[
                    ("op", &[OP_CHUNK_INFO]),
                    ("ver", &1u32.to_le_bytes()),
                    ("chunk_pos", &c.pos.to_le_bytes()),
                    ("start_time", &time_bytes(c.start)),
                    ("end_time", &time_bytes(c.end)),
                    ("count", &(c.counts.len() as u32).to_le_bytes()),
                ],
                &d,
            );
        }
        self.w.write_all(&out)?;
        let end = index_pos + out.len() as u64;
        self.w.seek(SeekFrom::Start(VERSION_LINE.len() as u64))?;
        self.w
            .write_all(&bag_header(index_pos, self.connections.len() as u32, self.chunks.len() as u32))?;
        self.w.seek(SeekFrom::Start(end))?;
        self.w.flush()?;

        let mut per_topic = BTreeMap::new();
        for c in &self.chunks {
            for (conn, n) in &c.counts {
                *per_topic.entry(self.connections[*conn as usize].topic.clone()).or_insert(0) += *n as u64;
            }
        }
        Ok(ExportSummary {
            messages: self.messages,
            connections: self.connections.len() as u32,
            chunks: self.chunks.len() as u32,
            bytes: end,
            per_topic,
        })
    }
}

fn bag_header(index_pos: u64, conn_count: u32, chunk_count: u32) -> Vec<u8> {
    let mut h = Vec::new();
    field(&mut h, "op", &[OP_BAG_HEADER]);
    field(&mut h, "index_pos", &index_pos.to_le_bytes());
    field(&mut h, "conn_count", &conn_count.to_le_bytes());
    field(&mut h, "chunk_count", &chunk_count.to_le_bytes());
    let pad = BAG_HEADER_RECORD_LEN - 8 - h.len();
    let mut out = Vec::with_capacity(BAG_HEADER_RECORD_LEN);
    out.extend_from_slice(&(h.len() as u32).to_le_bytes());
    out.extend_from_slice(&h);
    out.extend_from_slice(&(pad as u32).to_le_bytes());
    out.resize(BAG_HEADER_RECORD_LEN, b' ');
    out
}

/// Serializes every record of a frame: one message per image or cloud and
/// one per INS sample.
pub(super) fn frame_messages<W: Write + Seek>(
    frame: &Frame,
    topics: &TopicMap,
    w: &mut BagWriter<W>,
) -> Result<Vec<Message>, BagError> {
    let mut out = Vec::new();
    for (sensor, rec) in &frame.records {
        let topic = topics.topic(sensor).ok_or_else(|| BagError::UnmappedSensor(sensor.clone()))?;
        let conn = w.connection(topic, message_type(sensor.modality), false);
        let fid = frame_id(sensor);
        match rec {
            SensorRecord::Image(img) => {
                let seq = w.next_seq(conn);
                let data = messages::serialize_image(img, seq, ros_time(img.timestamp)?, &fid);
                out.push(Message {
                    conn,
                    time_ns: img.timestamp,
                    data,
                });
            }
            SensorRecord::Cloud(cloud) => {
                let seq = w.next_seq(conn);
                let data = messages::serialize_point_cloud(cloud, seq, ros_time(cloud.frame_timestamp)?, &fid);
                out.push(Message {
                    conn,
                    time_ns: cloud.frame_timestamp,
                    data,
                });
            }
            SensorRecord::InsBlock(samples) => {
                for s in samples {
                    let seq = w.next_seq(conn);
                    let data = messages::serialize_odometry(s, seq, ros_time(s.timestamp)?, &fid);
                    out.push(Message {
                        conn,
                        time_ns: s.timestamp,
                        data,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Static transforms from each agent's root to every other calibrated sensor.
pub(super) fn calibration_message<W: Write + Seek>(
    meta: &DatasetMeta,
    topics: &TopicMap,
    time_ns: u64,
    w: &mut BagWriter<W>,
) -> Result<Option<Message>, BagError> {
    let Some(topic) = topics.calibration_topic() else {
        return Ok(None);
    };
    let names: Vec<(String, String)> = meta
        .calibration
        .keys()
        .filter(|s| !s.is_root())
        .filter_map(|s| meta.root_of(s.agent).map(|r| (frame_id(r), frame_id(s))))
        .collect();
    if names.is_empty() {
        return Ok(None);
    }
    let transforms: Vec<StampedTransform<'_>> = meta
        .calibration
        .iter()
        .filter(|(s, _)| !s.is_root() && meta.root_of(s.agent).is_some())
        .zip(&names)
        .map(|((_, t), (parent, child))| StampedTransform {
            parent,
            child,
            // entries map root coordinates into the sensor; tf wants the sensor pose in the root
            parent_from_child: t.inverse(),
        })
        .collect();
    let conn = w.connection(topic, messages::TF_MESSAGE, true);
    Ok(Some(Message {
        conn,
        time_ns,
        data: messages::serialize_tf(&transforms, ros_time(time_ns)?),
    }))
}
