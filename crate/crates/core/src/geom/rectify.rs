use nalgebra::{Matrix3, Vector3};

use crate::model::{CameraImage, CameraIntrinsics};

use super::distortion::distort_point;
use super::GeomError;

/// Per-destination-pixel source coordinates. Pixel centres sit at integer
/// coordinates. A `NaN` entry marks a destination pixel with no source.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelMap {
    pub width: u32,
    pub height: u32,
    pub src_width: u32,
    pub src_height: u32,
    coords: Vec<[f64; 2]>,
}

impl PixelMap {
    /// Builds a map from explicit coordinates, row-major.
    pub fn from_coords(width: u32, height: u32, src_width: u32, src_height: u32, coords: Vec<[f64; 2]>) -> Self {
        assert_eq!(coords.len(), width as usize * height as usize, "one coordinate per destination pixel");
        Self {
            width,
            height,
            src_width,
            src_height,
            coords,
        }
    }

    /// Source coordinate for destination pixel `(x, y)`, or `None` when it has none.
    pub fn get(&self, x: u32, y: u32) -> Option<[f64; 2]> {
        let c = self.coords[(y * self.width + x) as usize];
        (!c[0].is_nan()).then_some(c)
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }
}

/// For each destination pixel: unproject with `dst`, rotate by `rotationᵀ`,
/// distort with the `src` coefficients and project with `src`.
///
/// `rotation` is the rectifying rotation taking source-camera rays to
/// destination-camera rays.
pub fn rectification_map(src: &CameraIntrinsics, dst: &CameraIntrinsics, rotation: &Matrix3<f64>) -> PixelMap {
    let rt = rotation.transpose();
    let mut coords = Vec::with_capacity(dst.width as usize * dst.height as usize);
    for v in 0..dst.height {
        for u in 0..dst.width {
            let ray = Vector3::new((u as f64 - dst.cx) / dst.fx, (v as f64 - dst.cy) / dst.fy, 1.0);
            let r = rt * ray;
            if r.z <= 0.0 {
                coords.push([f64::NAN; 2]);
                continue;
            }
            let [xd, yd] = distort_point(src, [r.x / r.z, r.y / r.z]);
            coords.push([src.fx * xd + src.cx, src.fy * yd + src.cy]);
        }
    }
    PixelMap {
        width: dst.width,
        height: dst.height,
        src_width: src.width,
        src_height: src.height,
        coords,
    }
}

/// Bilinear resampling of `image` through `map`. Destination pixels whose
/// source coordinate lies outside `[0, w−1] × [0, h−1]` become 0.
pub fn apply_map(image: &CameraImage, map: &PixelMap) -> Result<CameraImage, GeomError> {
    if (image.width, image.height) != (map.src_width, map.src_height) {
        return Err(GeomError::DimensionMismatch {
            expected: (map.src_width, map.src_height),
            actual: (image.width, image.height),
        });
    }
    let channels = image.channels();
    let stride = image.width as usize * channels;
    let pixels = resample(map, channels, |x, y, c| image.pixels[y as usize * stride + x as usize * channels + c]);
    Ok(CameraImage {
        sensor: image.sensor.clone(),
        timestamp: image.timestamp,
        width: map.width,
        height: map.height,
        encoding: image.encoding,
        pixels,
        exposure_us: image.exposure_us,
    })
}

/// Core of [`apply_map`]; every source access goes through `fetch(x, y, channel)`.
fn resample(map: &PixelMap, channels: usize, mut fetch: impl FnMut(u32, u32, usize) -> u8) -> Vec<u8> {
    let (w, h) = (map.src_width, map.src_height);
    let mut out = vec![0u8; map.width as usize * map.height as usize * channels];
    if w == 0 || h == 0 {
        return out;
    }
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    for (i, &[sx, sy]) in map.coords.iter().enumerate() {
        if !(sx >= 0.0 && sx <= max_x && sy >= 0.0 && sy <= max_y) {
            continue;
        }
        let x0 = (sx.floor() as u32).min(w.saturating_sub(2));
        let y0 = (sy.floor() as u32).min(h.saturating_sub(2));
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let (ax, ay) = (sx - x0 as f64, sy - y0 as f64);
        for c in 0..channels {
            let top = (1.0 - ax) * fetch(x0, y0, c) as f64 + ax * fetch(x1, y0, c) as f64;
            let bottom = (1.0 - ax) * fetch(x0, y1, c) as f64 + ax * fetch(x1, y1, c) as f64;
            let value = (1.0 - ay) * top + ay * bottom;
            out[i * channels + c] = value.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
