//! Random tool poses inside the common-view cuboid.

use nalgebra::{Matrix3, Unit, Vector3};
use rand::Rng;

use crate::cuboid::Cuboid;
use crate::se3::{rot_x, rot_z, Frame, RigidTransform};

/// Rotation whose z-axis is tilted from +z by an angle uniform in
/// `[0, max_tilt]` toward a uniform azimuth, followed by a uniform spin
/// about its own z-axis.
pub fn tilt_rotation(rng: &mut impl Rng, max_tilt: f64) -> Matrix3<f64> {
    let tilt = if max_tilt > 0.0 {
        rng.random_range(0.0..=max_tilt)
    } else {
        0.0
    };
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let spin = rng.random_range(0.0..std::f64::consts::TAU);
    let axis = Unit::new_normalize(Vector3::new(azimuth.cos(), azimuth.sin(), 0.0));
    let tilt_m = *nalgebra::Rotation3::from_axis_angle(&axis, tilt).matrix();
    tilt_m * rot_z(spin)
}

/// Tool-tip pose (tip → base) with the position uniform in `cuboid` and the
/// tool axis (local z) within `max_tilt` of pointing straight down.
pub fn sample_tool_pose(rng: &mut impl Rng, cuboid: &Cuboid, max_tilt: f64) -> RigidTransform {
    let position = Vector3::from_fn(|i, _| rng.random_range(cuboid.min_corner[i]..cuboid.max_corner[i]));
    let rotation = rot_x(std::f64::consts::PI) * tilt_rotation(rng, max_tilt);
    RigidTransform::from_parts_unchecked(
        crate::se3::orthonormalize(&rotation),
        position,
        Frame::ToolTip,
        Frame::Base,
    )
}

/// Angle between the tool axis of `pose` and straight down.
pub fn tilt_from_vertical(pose: &RigidTransform) -> f64 {
    let axis = pose.rotation().column(2);
    (-axis.z).clamp(-1.0, 1.0).acos()
}
