//! Fixed-stride payload encodings for images, point clouds and INS blocks.

use crate::model::{CameraImage, ImageEncoding, InsRecord, Point, PointCloud, SensorId, SensorRecord};

use super::layout::*;

/// Appends the encoded payload of `record` to `out` and returns its type tag.
pub fn encode_record(record: &SensorRecord, out: &mut Vec<u8>) -> PayloadType {
    match record {
        SensorRecord::Image(img) => {
            out.reserve(IMAGE_SUBHEADER_LEN + img.pixels.len());
            out.extend_from_slice(&img.timestamp.to_le_bytes());
            out.extend_from_slice(&img.width.to_le_bytes());
            out.extend_from_slice(&img.height.to_le_bytes());
            out.extend_from_slice(&[img.encoding.code(), 0, 0, 0]);
            out.extend_from_slice(&img.exposure_us.to_le_bytes());
            out.extend_from_slice(&img.pixels);
            PayloadType::Image
        }
        SensorRecord::Cloud(cloud) => {
            out.reserve(CLOUD_SUBHEADER_LEN + cloud.points.len() * POINT_STRIDE);
            out.extend_from_slice(&cloud.frame_timestamp.to_le_bytes());
            out.extend_from_slice(&(cloud.points.len() as u64).to_le_bytes());
            for p in &cloud.points {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
                out.extend_from_slice(&p.z.to_le_bytes());
                out.extend_from_slice(&p.intensity.to_le_bytes());
                out.extend_from_slice(&p.dt_ns.to_le_bytes());
                out.extend_from_slice(&p.channel.to_le_bytes());
                out.extend_from_slice(&[0, 0]);
            }
            PayloadType::PointCloud
        }
        SensorRecord::InsBlock(block) => {
            out.reserve(INS_BLOCK_SUBHEADER_LEN + block.len() * INS_RECORD_STRIDE);
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            for r in block {
                out.extend_from_slice(&r.timestamp.to_le_bytes());
                let values = [r.latitude, r.longitude, r.altitude]
                    .into_iter()
                    .chain(r.orientation)
                    .chain(r.velocity)
                    .chain(r.angular_rate);
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            PayloadType::InsBlock
        }
    }
}

/// Decodes a sensor payload. Errors are plain descriptions; the caller adds location.
///
/// Takes the payload by value so image pixels can reuse its allocation.
pub fn decode_record(ty: PayloadType, sensor: &SensorId, mut payload: Vec<u8>) -> Result<SensorRecord, String> {
    let b = payload.as_slice();
    match ty {
        PayloadType::Image => {
            if b.len() < IMAGE_SUBHEADER_LEN {
                return Err("image payload shorter than its sub-header".into());
            }
            let timestamp = le_u64(&b[0..8]);
            let width = le_u32(&b[8..12]);
            let height = le_u32(&b[12..16]);
            let encoding =
                ImageEncoding::from_code(b[16]).ok_or_else(|| format!("unknown image encoding {}", b[16]))?;
            let exposure_us = le_u32(&b[20..24]);
            let pixel_len = b.len() - IMAGE_SUBHEADER_LEN;
            if pixel_len != CameraImage::expected_len(width, height, encoding) {
                return Err(format!("image {width}x{height} {encoding:?} carries {pixel_len} pixel bytes"));
            }
            payload.drain(..IMAGE_SUBHEADER_LEN);
            Ok(SensorRecord::Image(CameraImage {
                sensor: sensor.clone(),
                timestamp,
                width,
                height,
                encoding,
                pixels: payload,
                exposure_us,
            }))
        }
        PayloadType::PointCloud => {
            if b.len() < CLOUD_SUBHEADER_LEN {
                return Err("point cloud payload shorter than its sub-header".into());
            }
            let frame_timestamp = le_u64(&b[0..8]);
            let count = le_u64(&b[8..16]);
            let body = &b[CLOUD_SUBHEADER_LEN..];
            if Some(body.len() as u64) != count.checked_mul(POINT_STRIDE as u64) {
                return Err(format!("point cloud declares {count} points in {} bytes", body.len()));
            }
            let points = body
                .chunks_exact(POINT_STRIDE)
                .map(|c| Point {
                    x: le_f32(&c[0..4]),
                    y: le_f32(&c[4..8]),
                    z: le_f32(&c[8..12]),
                    intensity: le_f32(&c[12..16]),
                    dt_ns: le_u32(&c[16..20]),
                    channel: le_u16(&c[20..22]),
                })
                .collect();
            Ok(SensorRecord::Cloud(PointCloud {
                sensor: sensor.clone(),
                frame_timestamp,
                points,
            }))
        }
        PayloadType::InsBlock => {
            if b.len() < INS_BLOCK_SUBHEADER_LEN {
                return Err("INS block shorter than its sub-header".into());
            }
            let count = le_u64(&b[0..8]);
            let body = &b[INS_BLOCK_SUBHEADER_LEN..];
            if Some(body.len() as u64) != count.checked_mul(INS_RECORD_STRIDE as u64) {
                return Err(format!("INS block declares {count} records in {} bytes", body.len()));
            }
            let records = body
                .chunks_exact(INS_RECORD_STRIDE)
                .map(|c| {
                    let f = |i: usize| le_f64(&c[8 + 8 * i..16 + 8 * i]);
                    InsRecord {
                        timestamp: le_u64(&c[0..8]),
                        latitude: f(0),
                        longitude: f(1),
                        altitude: f(2),
                        orientation: [f(3), f(4), f(5), f(6)],
                        velocity: [f(7), f(8), f(9)],
                        angular_rate: [f(10), f(11), f(12)],
                    }
                })
                .collect();
            Ok(SensorRecord::InsBlock(records))
        }
        PayloadType::None => Err("sensor payload without a payload type".into()),
    }
}

/// FRAME_START payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameStart {
    pub frame_index: u64,
    pub reference_timestamp: u64,
    pub payload_count: u32,
    pub missing: Vec<u16>,
}

impl FrameStart {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(FRAME_START_FIXED_LEN + 2 * self.missing.len());
        b.extend_from_slice(&self.frame_index.to_le_bytes());
        b.extend_from_slice(&self.reference_timestamp.to_le_bytes());
        b.extend_from_slice(&self.payload_count.to_le_bytes());
        b.extend_from_slice(&(self.missing.len() as u32).to_le_bytes());
        for m in &self.missing {
            b.extend_from_slice(&m.to_le_bytes());
        }
        b
    }

    pub fn decode(b: &[u8]) -> Result<Self, String> {
        if b.len() < FRAME_START_FIXED_LEN {
            return Err("FRAME_START payload too short".into());
        }
        let missing_count = le_u32(&b[20..24]) as usize;
        let rest = &b[FRAME_START_FIXED_LEN..];
        if rest.len() != missing_count * 2 {
            return Err(format!("FRAME_START lists {missing_count} missing sensors in {} bytes", rest.len()));
        }
        Ok(Self {
            frame_index: le_u64(&b[0..8]),
            reference_timestamp: le_u64(&b[8..16]),
            payload_count: le_u32(&b[16..20]),
            missing: rest.chunks_exact(2).map(le_u16).collect(),
        })
    }
}

pub fn encode_index(entries: &[IndexEntry]) -> Vec<u8> {
    let mut b = Vec::with_capacity(8 + entries.len() * INDEX_ENTRY_LEN);
    b.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for e in entries {
        b.extend_from_slice(&e.frame_index.to_le_bytes());
        b.extend_from_slice(&e.byte_offset.to_le_bytes());
        b.extend_from_slice(&e.reference_timestamp.to_le_bytes());
    }
    b
}

pub fn decode_index(b: &[u8]) -> Result<Vec<IndexEntry>, String> {
    if b.len() < 8 {
        return Err("INDEX payload too short".into());
    }
    let count = le_u64(&b[0..8]);
    let body = &b[8..];
    if Some(body.len() as u64) != count.checked_mul(INDEX_ENTRY_LEN as u64) {
        return Err(format!("INDEX declares {count} entries in {} bytes", body.len()));
    }
    let entries: Vec<IndexEntry> = body
        .chunks_exact(INDEX_ENTRY_LEN)
        .map(|c| IndexEntry {
            frame_index: le_u64(&c[0..8]),
            byte_offset: le_u64(&c[8..16]),
            reference_timestamp: le_u64(&c[16..24]),
        })
        .collect();
    for w in entries.windows(2) {
        if w[1].frame_index <= w[0].frame_index || w[1].byte_offset <= w[0].byte_offset {
            return Err("INDEX entries are not strictly increasing".into());
        }
    }
    Ok(entries)
}
