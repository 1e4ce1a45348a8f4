//! Rigid-body transforms (SE(3)) used for every extrinsic in a dataset.

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Elementwise tolerance for `RᵀR = I` and `det R = 1` on construction.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Drift above which [`RigidTransform::compose`] re-orthonormalizes its result.
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-12;

/// Rotation plus translation, acting on points as `p ↦ R·p + t`.
///
/// Rotation is held as a 3×3 matrix. Quaternions are accepted and produced at
/// serialization boundaries only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// unit determinant within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, ModelError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(ModelError::InvalidTransform("non-finite component".into()));
        }
        let err = orthonormality_error(&rotation);
        if err > ROTATION_TOLERANCE {
            return Err(ModelError::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(ModelError::InvalidTransform(format!(
                "rotation determinant is {det}, expected 1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation given as axis·angle (radians), followed by `translation`.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *Rotation3::new(axis_angle).matrix(),
            translation,
        }
    }

    /// Quaternion in `[x, y, z, w]` order. Norms within 1e-6 of one are
    /// normalized; anything further off is rejected.
    pub fn from_quaternion(xyzw: [f64; 4], translation: Vector3<f64>) -> Result<Self, ModelError> {
        let q = Quaternion::new(xyzw[3], xyzw[0], xyzw[1], xyzw[2]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(ModelError::InvalidTransform(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        let unit = UnitQuaternion::from_quaternion(q);
        Self::new(*unit.to_rotation_matrix().matrix(), translation)
    }

    /// Builds from a 4×4 homogeneous matrix whose last row must be `[0 0 0 1]`.
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self, ModelError> {
        let last = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if last != [0.0, 0.0, 0.0, 1.0] {
            return Err(ModelError::InvalidTransform(
                "homogeneous matrix last row must be [0 0 0 1]".into(),
            ));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Unit quaternion `[x, y, z, w]` with non-negative `w`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        let c = q.coords;
        if c.w < 0.0 {
            [-c.x, -c.y, -c.z, -c.w]
        } else {
            [c.x, c.y, c.z, c.w]
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_error(&rotation) > REORTHONORMALIZE_THRESHOLD {
            rotation = reorthonormalize(rotation);
        }
        RigidTransform {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Closed-form inverse `(Rᵀ, −Rᵀ·t)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a direction, ignoring translation.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Largest elementwise deviation of the 4×4 forms of `self` and `other`.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).amax()
    }

    /// `max |RᵀR − I|` over all elements.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.max_abs_diff(&RigidTransform::identity()) <= tol
    }
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Projects a near-orthonormal matrix onto SO(3) with Newton–Schulz steps
/// `R ← R·(3I − RᵀR)/2`, which converge quadratically to the polar factor.
fn reorthonormalize(mut r: Matrix3<f64>) -> Matrix3<f64> {
    for _ in 0..8 {
        let gram = r.transpose() * r;
        if (gram - Matrix3::identity()).amax() <= f64::EPSILON * 4.0 {
            break;
        }
        r = r * (Matrix3::identity() * 3.0 - gram) * 0.5;
    }
    r
}

/// Serialized form: row-major rotation matrix, or a quaternion on input.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quaternion: Option<[f64; 4]>,
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = &t.rotation;
        TransformRepr {
            rotation: Some([
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ]),
            quaternion: None,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = ModelError;

    fn try_from(repr: TransformRepr) -> Result<Self, Self::Error> {
        let translation = Vector3::from(repr.translation);
        match (repr.rotation, repr.quaternion) {
            (Some(rows), None) => {
                let m = Matrix3::from_fn(|i, j| rows[i][j]);
                RigidTransform::new(m, translation)
            }
            (None, Some(q)) => RigidTransform::from_quaternion(q, translation),
            (Some(_), Some(_)) => Err(ModelError::InvalidTransform(
                "give either rotation or quaternion, not both".into(),
            )),
            (None, None) => Err(ModelError::InvalidTransform(
                "missing rotation or quaternion".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rz(angle: f64, t: [f64; 3]) -> RigidTransform {
        RigidTransform::from_axis_angle(Vector3::new(0.0, 0.0, angle), Vector3::from(t))
    }

    #[test]
    fn identity_is_neutral() {
        let t = rz(0.3, [1.0, -2.0, 0.5]);
        assert_eq!(RigidTransform::identity().compose(&t), t);
        assert_eq!(t.compose(&RigidTransform::identity()), t);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = rz(1.1, [4.0, 5.0, -6.0]);
        assert!(t.compose(&t.inverse()).is_identity(1e-9));
        assert!(t.inverse().compose(&t).is_identity(1e-9));
    }

    #[test]
    fn quarter_turns_compose() {
        // Homogeneous product of [Rz(90°) | (1,0,0)] and [Rz(90°) | 0]
        // is [Rz(180°) | (1,0,0)].
        let a = rz(FRAC_PI_2, [1.0, 0.0, 0.0]);
        let b = rz(FRAC_PI_2, [0.0, 0.0, 0.0]);
        let c = a.compose(&b);
        let expected = Matrix4::new(
            -1.0, 0.0, 0.0, 1.0, //
            0.0, -1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        assert!((c.to_homogeneous() - expected).amax() < 1e-12);
    }

    #[test]
    fn inverse_of_pure_translation() {
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(*t.inverse().translation(), Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(
            RigidTransform::identity().inverse(),
            RigidTransform::identity()
        );
    }

    #[test]
    fn apply_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().apply(&p), p);
        let up = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 5.0));
        assert_eq!(up.apply(&Vector3::zeros()), Vector3::new(0.0, 0.0, 5.0));
        let q = rz(FRAC_PI_2, [0.0; 3]).apply(&Vector3::x());
        assert!((q - Vector3::y()).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
        let m = Matrix3::identity() * 1.001;
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let step = RigidTransform::from_axis_angle(
            Vector3::new(0.123, -0.456, 0.789),
            Vector3::new(0.1, 0.2, 0.3),
        );
        let mut acc = RigidTransform::identity();
        for _ in 0..10_000 {
            acc = acc.compose(&step);
        }
        assert!(acc.orthonormality_error() < 1e-9);
        assert!((acc.rotation().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reorthonormalize_recovers_rotation() {
        let r = *Rotation3::new(Vector3::new(0.3, 0.2, 0.1)).matrix();
        let noisy = r + Matrix3::from_element(1e-7);
        let fixed = reorthonormalize(noisy);
        assert!(orthonormality_error(&fixed) < 1e-14);
        assert!((fixed - r).amax() < 1e-6);
    }

    #[test]
    fn serde_accepts_quaternion_and_emits_matrix() {
        let json = r#"{"quaternion":[0.0,0.0,0.7071067811865476,0.7071067811865476],"translation":[1,2,3]}"#;
        let t: RigidTransform = serde_json::from_str(json).unwrap();
        assert!((t.apply(&Vector3::x()) - Vector3::new(1.0, 3.0, 3.0)).amax() < 1e-12);
        let out = serde_json::to_string(&t).unwrap();
        assert!(out.contains("\"rotation\""));
        let back: RigidTransform = serde_json::from_str(&out).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn quaternion_round_trip() {
        let t = rz(2.5, [0.0; 3]);
        let q = t.quaternion();
        let back = RigidTransform::from_quaternion(q, Vector3::zeros()).unwrap();
        assert!(back.max_abs_diff(&t) < 1e-12);
    }
}
