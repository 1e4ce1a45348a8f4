//! Depth colouring: near points yellow, through purple, to black for the
//! most distant ones.

use super::GeomError;

pub const YELLOW: [u8; 3] = [255, 255, 0];
pub const PURPLE: [u8; 3] = [128, 0, 128];
const BLACK: [u8; 3] = [0, 0, 0];

/// Linear-interpolated percentile (`q` in `[0, 100]`) of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Colour of `depth` on the ramp spanning `[near, far]`; depths outside are
/// clamped. A zero-width range maps everything to yellow.
pub fn depth_color(depth: f64, near: f64, far: f64) -> [u8; 3] {
    let s = if far > near {
        ((depth - near) / (far - near)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (from, to, a) = if s <= 0.5 {
        (YELLOW, PURPLE, s / 0.5)
    } else {
        (PURPLE, BLACK, (s - 0.5) / 0.5)
    };
    let mix = |i: usize| (from[i] as f64 + (to[i] as f64 - from[i] as f64) * a).round() as u8;
    [mix(0), mix(1), mix(2)]
}

/// Colours depths on a ramp spanning their 1st to 99th percentile.
pub fn colorize_depth(depths: &[f64]) -> Result<Vec<[u8; 3]>, GeomError> {
    if depths.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let mut sorted = depths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let near = percentile(&sorted, 1.0);
    let far = percentile(&sorted, 99.0);
    Ok(depths.iter().map(|&d| depth_color(d, near, far)).collect())
}

/// Colours depths on an explicit `[near, far]` ramp.
pub fn colorize_depth_range(depths: &[f64], near: f64, far: f64) -> Result<Vec<[u8; 3]>, GeomError> {
    if depths.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    Ok(depths.iter().map(|&d| depth_color(d, near, far)).collect())
}
