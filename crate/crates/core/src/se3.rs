//! Rigid-body transforms between tagged coordinate frames.
//!
//! A [`RigidTransform`] maps point coordinates expressed in `from_frame` into
//! `to_frame`. The pose of the flange in the base frame is therefore a
//! transform with `from_frame = Flange` and `to_frame = Base`.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named coordinate frames used across the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Base,
    Flange,
    ToolTip,
    /// Frame attached after DH row `n` (1-based); `Link(0)` is the base.
    Link(u8),
    CamLeft,
    CamRight,
    /// Local frame of a scene primitive.
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    from_frame: Frame,
    to_frame: Frame,
}

/// Nearest rotation matrix in the Frobenius sense (polar factor), with
/// determinant forced to +1.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 svd computes u");
    let v_t = svd.v_t.expect("3x3 svd computes v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Largest absolute entry of `RᵀR − I`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Rotation vector (axis times angle) of `r`.
///
/// Uses `atan2(‖vee(R − Rᵀ)‖/2, (tr R − 1)/2)` so tiny angles keep full
/// relative precision (an `acos` of the trace loses about half the digits).
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let s = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let c = 0.5 * (r.trace() - 1.0);
    let sin = s.norm();
    let angle = sin.atan2(c);
    if angle < 1e-6 {
        // θ/sin θ = 1 + θ²/6 + …
        return s * (1.0 + angle * angle / 6.0);
    }
    if angle < std::f64::consts::PI - 1e-6 {
        return s * (angle / sin);
    }
    // Near a half turn the skew part vanishes; read the axis off R + I.
    let b = r + Matrix3::identity();
    let col = (0..3)
        .max_by(|&i, &j| b.column(i).norm().total_cmp(&b.column(j).norm()))
        .unwrap_or(0);
    let mut axis = b.column(col).normalize();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    axis * angle
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::x_axis(), angle).matrix()
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::y_axis(), angle).matrix()
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
}

/// Rotation taking the unit vector `from` onto the unit vector `to`.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    match Rotation3::rotation_between(from, to) {
        Some(r) => *r.matrix(),
        None => {
            // Antiparallel: half turn about any axis orthogonal to `from`.
            let helper = if from.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let axis = nalgebra::Unit::new_normalize(from.cross(&helper));
            *Rotation3::from_axis_angle(&axis, std::f64::consts::PI).matrix()
        }
    }
}

impl RigidTransform {
    /// Builds a transform, projecting `rotation` onto SO(3).
    ///
    /// Inputs further than 1e-6 from orthonormal are rejected rather than
    /// silently repaired.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite transform".into()));
        }
        if orthonormality_error(&rotation) > 1e-6 || rotation.determinant() < 0.0 {
            return Err(Error::InvalidConfig(
                "rotation matrix is not a proper rotation".into(),
            ));
        }
        Ok(Self::from_parts_unchecked(
            orthonormalize(&rotation),
            translation,
            from_frame,
            to_frame,
        ))
    }

    pub(crate) fn from_parts_unchecked(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Self {
        Self {
            rotation,
            translation,
            from_frame,
            to_frame,
        }
    }

    pub fn identity(frame: Frame) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vector3::zeros(), frame, frame)
    }

    pub fn from_translation(translation: Vector3<f64>, from_frame: Frame, to_frame: Frame) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), translation, from_frame, to_frame)
    }

    pub fn from_rotation(rotation: Matrix3<f64>, from_frame: Frame, to_frame: Frame) -> Result<Self> {
        Self::new(rotation, Vector3::zeros(), from_frame, to_frame)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn from_frame(&self) -> Frame {
        self.from_frame
    }

    pub fn to_frame(&self) -> Frame {
        self.to_frame
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        // Canonical hemisphere so labels are unique.
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Same transform with new frame tags.
    pub fn retagged(&self, from_frame: Frame, to_frame: Frame) -> Self {
        Self {
            from_frame,
            to_frame,
            ..self.clone()
        }
    }

    /// `self ∘ other`: maps `other.from_frame` into `self.to_frame`.
    ///
    /// The product rotation is re-orthonormalized so long chains keep
    /// `‖RᵀR − I‖∞` at rounding level.
    pub fn compose(&self, other: &RigidTransform) -> Result<RigidTransform> {
        if self.from_frame != other.to_frame {
            return Err(Error::FrameMismatch {
                expected: self.from_frame,
                found: other.to_frame,
            });
        }
        Ok(Self::from_parts_unchecked(
            orthonormalize(&(self.rotation * other.rotation)),
            self.rotation * other.translation + self.translation,
            other.from_frame,
            self.to_frame,
        ))
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self::from_parts_unchecked(rt, -(rt * self.translation), self.to_frame, self.from_frame)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Translation distance and rotation angle between two transforms.
    pub fn distance(&self, other: &RigidTransform) -> (f64, f64) {
        let dp = (self.translation - other.translation).norm();
        let angle = rotation_log(&(self.rotation * other.rotation.transpose())).norm();
        (dp, angle)
    }
}

/// Free-function form of [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> Result<RigidTransform> {
    a.compose(b)
}

/// Free-function form of [`RigidTransform::inverse`].
pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}
