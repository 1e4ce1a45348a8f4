use serde::{Deserialize, Serialize};

use super::{ModelError, SensorId};

/// Pinhole intrinsics with 5-coefficient radial-tangential distortion
/// `[k1, k2, p1, p2, k3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub distortion: [f64; 5],
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Undistorted intrinsics with the principal point at the image centre.
    pub fn ideal(fx: f64, fy: f64, width: u32, height: u32) -> Self {
        Self {
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            distortion: [0.0; 5],
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64
            && self.distortion.iter().all(|d| d.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    pub fn k1(&self) -> f64 {
        self.distortion[0]
    }
    pub fn k2(&self) -> f64 {
        self.distortion[1]
    }
    pub fn p1(&self) -> f64 {
        self.distortion[2]
    }
    pub fn p2(&self) -> f64 {
        self.distortion[3]
    }
    pub fn k3(&self) -> f64 {
        self.distortion[4]
    }

    /// `2·atan(width / 2fx)` in degrees.
    pub fn horizontal_fov(&self) -> f64 {
        (2.0 * (self.width as f64 / (2.0 * self.fx)).atan()).to_degrees()
    }

    /// `2·atan(height / 2fy)` in degrees.
    pub fn vertical_fov(&self) -> f64 {
        (2.0 * (self.height as f64 / (2.0 * self.fy)).atan()).to_degrees()
    }

    /// The same camera sampled at `width × height`, e.g. for downscaled
    /// stored images. Distortion acts on normalized coordinates and is kept.
    pub fn scaled_to(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            distortion: self.distortion,
            width,
            height,
        }
    }

    /// Focal length in pixels giving `fov_deg` across `extent_px`.
    pub fn focal_for_fov(extent_px: u32, fov_deg: f64) -> f64 {
        extent_px as f64 / (2.0 * (fov_deg.to_radians() / 2.0).tan())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImageEncoding {
    Rgb8,
    Bgr8,
    Mono8,
}

impl ImageEncoding {
    pub fn channels(self) -> usize {
        match self {
            ImageEncoding::Rgb8 | ImageEncoding::Bgr8 => 3,
            ImageEncoding::Mono8 => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ImageEncoding::Rgb8 => 1,
            ImageEncoding::Bgr8 => 2,
            ImageEncoding::Mono8 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ImageEncoding::Rgb8),
            2 => Some(ImageEncoding::Bgr8),
            3 => Some(ImageEncoding::Mono8),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraImage {
    pub sensor: SensorId,
    /// Nanoseconds since the Unix epoch, UTC.
    pub timestamp: u64,
    pub width: u32,
    pub height: u32,
    pub encoding: ImageEncoding,
    pub pixels: Vec<u8>,
    pub exposure_us: u32,
}

impl CameraImage {
    pub fn new(
        sensor: SensorId,
        timestamp: u64,
        width: u32,
        height: u32,
        encoding: ImageEncoding,
        pixels: Vec<u8>,
        exposure_us: u32,
    ) -> Result<Self, ModelError> {
        let img = Self {
            sensor,
            timestamp,
            width,
            height,
            encoding,
            pixels,
            exposure_us,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn expected_len(width: u32, height: u32, encoding: ImageEncoding) -> usize {
        width as usize * height as usize * encoding.channels()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let expected = Self::expected_len(self.width, self.height, self.encoding);
        if self.pixels.len() != expected {
            return Err(ModelError::PixelBufferLength {
                expected,
                actual: self.pixels.len(),
            });
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.encoding.channels()
    }

    /// Channel values of pixel `(x, y)`.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.pixels[i..i + c]
    }

    /// Pixel buffer converted to interleaved RGB.
    pub fn to_rgb(&self) -> Vec<u8> {
        match self.encoding {
            ImageEncoding::Rgb8 => self.pixels.clone(),
            ImageEncoding::Bgr8 => self
                .pixels
                .chunks_exact(3)
                .flat_map(|p| [p[2], p[1], p[0]])
                .collect(),
            ImageEncoding::Mono8 => self.pixels.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Agent, Modality};

    #[test]
    fn horizontal_fov_examples() {
        let unit = CameraIntrinsics::ideal(960.0, 960.0, 1920, 1200);
        assert!((unit.horizontal_fov() - 90.0).abs() < 1e-12);

        let far = CameraIntrinsics::ideal(1e9, 1e9, 1920, 1200);
        assert!(far.horizontal_fov() < 0.001);

        // fx recovered from the narrow camera's 57.6° datasheet value.
        let narrow = CameraIntrinsics::ideal(1746.1, 1746.1, 1920, 1200);
        assert!((narrow.horizontal_fov() - 57.6).abs() < 0.05);
        let fx = CameraIntrinsics::focal_for_fov(1920, 57.6);
        assert!((fx - 1746.1).abs() < 0.5, "fx = {fx}");
    }

    #[test]
    fn scaling_keeps_field_of_view() {
        let k = CameraIntrinsics::ideal(1746.1, 1746.1, 1920, 1200);
        let small = k.scaled_to(192, 120);
        assert!((small.horizontal_fov() - k.horizontal_fov()).abs() < 1e-12);
        assert!((small.vertical_fov() - k.vertical_fov()).abs() < 1e-12);
        assert_eq!((small.cx, small.cy), (96.0, 60.0));
    }

    #[test]
    fn intrinsics_validation() {
        let mut k = CameraIntrinsics::ideal(1000.0, 1000.0, 640, 480);
        assert!(k.validate().is_ok());
        k.cx = 640.0;
        assert!(k.validate().is_err());
        k.cx = 320.0;
        k.fy = 0.0;
        assert!(k.validate().is_err());
    }

    #[test]
    fn buffer_length_checked() {
        let id = SensorId::new(Agent::Vehicle, "FRONT_LEFT", Modality::Camera).unwrap();
        assert!(CameraImage::new(id.clone(), 0, 2, 2, ImageEncoding::Rgb8, vec![0; 12], 800).is_ok());
        let err = CameraImage::new(id, 0, 2, 2, ImageEncoding::Rgb8, vec![0; 4], 800).unwrap_err();
        assert!(matches!(err, ModelError::PixelBufferLength { expected: 12, actual: 4 }));
    }

    #[test]
    fn bgr_to_rgb() {
        let id = SensorId::new(Agent::Vehicle, "FRONT_LEFT", Modality::Camera).unwrap();
        let img = CameraImage::new(id, 0, 1, 1, ImageEncoding::Bgr8, vec![1, 2, 3], 0).unwrap();
        assert_eq!(img.to_rgb(), vec![3, 2, 1]);
    }
}
