//! Brown–Conrady radial-tangential lens model on normalized image coordinates.

use crate::model::CameraIntrinsics;

use super::GeomError;

pub const UNDISTORT_MAX_ITERATIONS: usize = 20;
/// Iteration stops once the update step is shorter than this.
pub const UNDISTORT_STEP_TOLERANCE: f64 = 1e-10;

/// Applies the lens model:
/// `x_d = x(1 + k1 r² + k2 r⁴ + k3 r⁶) + 2 p1 x y + p2 (r² + 2x²)`,
/// `y_d = y(1 + k1 r² + k2 r⁴ + k3 r⁶) + p1 (r² + 2y²) + 2 p2 x y`.
pub fn distort_point(intr: &CameraIntrinsics, p: [f64; 2]) -> [f64; 2] {
    let [k1, k2, p1, p2, k3] = intr.distortion;
    let [x, y] = p;
    let r2 = x * x + y * y;
    let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    [
        x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
        y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y,
    ]
}

/// Jacobian of [`distort_point`], row-major.
fn jacobian(d: &[f64; 5], x: f64, y: f64) -> [[f64; 2]; 2] {
    let [k1, k2, p1, p2, k3] = *d;
    let r2 = x * x + y * y;
    let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    // d(radial)/d(r²)
    let g = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
    let cross = 2.0 * g * x * y;
    [
        [radial + 2.0 * g * x * x + 2.0 * p1 * y + 6.0 * p2 * x, cross + 2.0 * p1 * x + 2.0 * p2 * y],
        [cross + 2.0 * p1 * x + 2.0 * p2 * y, radial + 2.0 * g * y * y + 6.0 * p1 * y + 2.0 * p2 * x],
    ]
}

/// Inverts [`distort_point`] by Newton iteration started at the distorted
/// point.
///
/// Plain fixed-point iteration converges too slowly at the strong end of the
/// supported range (|k1| up to 0.5) to reach the step tolerance in 20 rounds;
/// Newton reaches it in a handful.
pub fn undistort_point(intr: &CameraIntrinsics, pd: [f64; 2]) -> Result<[f64; 2], GeomError> {
    if intr.distortion.iter().all(|&c| c == 0.0) {
        return Ok(pd);
    }
    let [mut x, mut y] = pd;
    for _ in 0..UNDISTORT_MAX_ITERATIONS {
        let [fx, fy] = distort_point(intr, [x, y]);
        let (ex, ey) = (fx - pd[0], fy - pd[1]);
        let [[a, b], [c, d]] = jacobian(&intr.distortion, x, y);
        let det = a * d - b * c;
        if !det.is_finite() || det.abs() < 1e-12 {
            break;
        }
        let dx = (d * ex - b * ey) / det;
        let dy = (a * ey - c * ex) / det;
        x -= dx;
        y -= dy;
        if (dx * dx + dy * dy).sqrt() < UNDISTORT_STEP_TOLERANCE {
            return Ok([x, y]);
        }
    }
    Err(GeomError::NoConvergence(pd[0], pd[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(d: [f64; 5]) -> CameraIntrinsics {
        let mut k = CameraIntrinsics::ideal(1000.0, 1000.0, 1920, 1200);
        k.distortion = d;
        k
    }

    #[test]
    fn reference_values() {
        let zero = with([0.0; 5]);
        assert_eq!(distort_point(&zero, [0.3, -0.2]), [0.3, -0.2]);
        let k = with([0.1, 0.0, 0.0, 0.0, 0.0]);
        let d = distort_point(&k, [0.5, 0.0]);
        assert!((d[0] - 0.5125).abs() < 1e-15 && d[1] == 0.0);
        let u = undistort_point(&k, [0.5125, 0.0]).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-8 && u[1].abs() < 1e-12);
        let any = with([0.3, -0.05, 0.01, -0.01, 0.002]);
        assert_eq!(distort_point(&any, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = [0.4, -0.08, 0.007, -0.004, 0.009];
        let k = with(d);
        let (x, y) = (0.31, -0.22);
        let h = 1e-6;
        let j = jacobian(&d, x, y);
        let fxp = distort_point(&k, [x + h, y]);
        let fxm = distort_point(&k, [x - h, y]);
        let fyp = distort_point(&k, [x, y + h]);
        let fym = distort_point(&k, [x, y - h]);
        for r in 0..2 {
            assert!((j[r][0] - (fxp[r] - fxm[r]) / (2.0 * h)).abs() < 1e-7);
            assert!((j[r][1] - (fyp[r] - fym[r]) / (2.0 * h)).abs() < 1e-7);
        }
    }
}
