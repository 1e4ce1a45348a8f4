//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// Bit-at-a-time CRC-32C (reflected Castagnoli polynomial 0x82F63B78).
pub fn crc32c_reference(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &byte in data {
        crc ^= byte as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0x82F6_3B78 & mask);
        }
    }
    !crc
}

/// Walks the record sequence of a `.4mse` byte image without using the
/// library. Returns `(offset, kind, sensor_id, payload range)` per record.
pub fn record_spans(bytes: &[u8]) -> Vec<(usize, u8, u16, std::ops::Range<usize>)> {
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let mut pos = 20 + meta_len;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let kind = bytes[pos];
        let sensor = u16::from_le_bytes(bytes[pos + 4..pos + 6].try_into().unwrap());
        let len = u64::from_le_bytes(bytes[pos + 8..pos + 16].try_into().unwrap()) as usize;
        out.push((pos, kind, sensor, pos + 20..pos + 20 + len));
        pos += 20 + len;
    }
    assert_eq!(pos, bytes.len(), "records do not tile the file");
    out
}
pub mod bag;
pub mod geometry;
