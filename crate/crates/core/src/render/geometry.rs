//! Robot links and screwdrivers as render primitives.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::{InstanceId, Material, Primitive};
use super::shapes::Shape;
use super::texture::Rgb;
use crate::calibration::ToolOffset;
use crate::error::{Error, Result};
use crate::kinematics::{JointVector, KinematicChain};
use crate::se3::{Frame, RigidTransform};

pub const ROBOT_COLOR: Rgb = [0.85, 0.45, 0.1];

/// One capsule per link, spanning consecutive joint origins, in link order.
/// The last capsule is the tool holder.
pub fn robot_geometry(chain: &KinematicChain, q: &JointVector) -> Result<Vec<Primitive>> {
    let origins = chain.joint_origins(q)?;
    origins
        .windows(2)
        .zip(chain.link_radii)
        .map(|(pair, radius)| {
            Primitive::capsule_between(&pair[0], &pair[1], radius, Material::solid(ROBOT_COLOR), InstanceId::Robot)
        })
        .collect()
}

/// Cloth wrapping: a single matte material and inflated radii on every link
/// except, optionally, the tool holder.
#[derive(Debug, Clone)]
pub struct ClothStyle {
    pub material: Material,
    pub inflation: f64,
    pub clothe_holder: bool,
}

impl ClothStyle {
    pub fn apply(&self, links: &mut [Primitive]) {
        let n = links.len();
        for (i, link) in links.iter_mut().enumerate() {
            if i + 1 == n && !self.clothe_holder {
                continue;
            }
            link.material = self.material.clone();
            if let Shape::Capsule { radius, .. } = &mut link.shape {
                *radius += self.inflation;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrewdriverSpec {
    pub id: String,
    pub shaft_length: f64,
    pub shaft_radius: f64,
    /// Overall handle length including its rounded ends.
    pub handle_length: f64,
    pub handle_radius: f64,
    pub handle_albedo: Rgb,
    pub shaft_albedo: Rgb,
}

impl ScrewdriverSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.shaft_length, self.shaft_radius, self.handle_length, self.handle_radius]
            .iter()
            .all(|v| *v > 0.0);
        if !positive || self.handle_length <= 2.0 * self.handle_radius {
            return Err(Error::InvalidConfig(format!(
                "screwdriver '{}' needs positive sizes and a handle longer than its diameter",
                self.id
            )));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.shaft_length + self.handle_length
    }

    /// Nominal tool offset when the handle end sits on the flange.
    pub fn nominal_offset(&self) -> ToolOffset {
        ToolOffset::new(Vector3::new(0.0, 0.0, self.total_length()))
    }
}

/// Shaft cylinder ending at the tip and a coaxial handle capsule behind it.
/// `tip_pose` maps tool-tip coordinates (axis along +z, pointing from the
/// handle toward the tip) to the base frame.
pub fn screwdriver_primitives(spec: &ScrewdriverSpec, tip_pose: &RigidTransform) -> Result<Vec<Primitive>> {
    spec.validate()?;
    let local = |z: f64| RigidTransform::from_translation(Vector3::new(0.0, 0.0, z), Frame::Object, Frame::ToolTip);
    let shaft = Primitive::new(
        Shape::Cylinder {
            half_length: 0.5 * spec.shaft_length,
            radius: spec.shaft_radius,
        },
        tip_pose.compose(&local(-0.5 * spec.shaft_length))?,
        Material::solid(spec.shaft_albedo),
        InstanceId::Tool,
    )?;
    let handle = Primitive::new(
        Shape::Capsule {
            half_length: 0.5 * spec.handle_length - spec.handle_radius,
            radius: spec.handle_radius,
        },
        tip_pose.compose(&local(-spec.shaft_length - 0.5 * spec.handle_length))?,
        Material::solid(spec.handle_albedo),
        InstanceId::Tool,
    )?;
    Ok(vec![shaft, handle])
}

/// Tip and back end of the screwdriver in the base frame.
pub fn screwdriver_endpoints(spec: &ScrewdriverSpec, tip_pose: &RigidTransform) -> (Vector3<f64>, Vector3<f64>) {
    (
        *tip_pose.translation(),
        tip_pose.transform_point(&Vector3::new(0.0, 0.0, -spec.total_length())),
    )
}
