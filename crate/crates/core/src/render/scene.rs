//! Primitives, materials, lighting and the scene container.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::shapes::Shape;
use super::texture::{Rgb, Solid, TexturePattern};
use crate::camera::Ray;
use crate::error::{Error, Result};
use crate::se3::{rotation_between, Frame, RigidTransform};

/// Instance class written to id maps: 0 background, 1 robot, 2 tool,
/// `3 + k` for distractor `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceId {
    Background,
    Robot,
    Tool,
    Distractor(u16),
}

impl InstanceId {
    pub fn code(self) -> u16 {
        match self {
            InstanceId::Background => 0,
            InstanceId::Robot => 1,
            InstanceId::Tool => 2,
            InstanceId::Distractor(k) => 3 + k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Material {
    pub texture: Arc<dyn TexturePattern>,
}

impl Material {
    pub fn solid(color: Rgb) -> Self {
        Material {
            texture: Arc::new(Solid { color }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Primitive {
    pub shape: Shape,
    /// Object → base.
    pub pose: RigidTransform,
    pub material: Material,
    pub instance: InstanceId,
}

/// World-frame intersection with the surface albedo already looked up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldHit {
    pub t: f64,
    pub normal: Vector3<f64>,
    pub albedo: Rgb,
}

impl Primitive {
    pub fn new(shape: Shape, pose: RigidTransform, material: Material, instance: InstanceId) -> Result<Self> {
        if !shape.validate() {
            return Err(Error::InvalidConfig(format!("non-positive dimensions in {shape:?}")));
        }
        if pose.from_frame() != Frame::Object || pose.to_frame() != Frame::Base {
            return Err(Error::FrameMismatch {
                expected: Frame::Object,
                found: pose.from_frame(),
            });
        }
        Ok(Primitive {
            shape,
            pose,
            material,
            instance,
        })
    }

    /// Capsule whose axis segment runs from `a` to `b`.
    pub fn capsule_between(a: &Vector3<f64>, b: &Vector3<f64>, radius: f64, material: Material, instance: InstanceId) -> Result<Self> {
        let axis = b - a;
        let length = axis.norm();
        let rotation = if length > 0.0 {
            rotation_between(&Vector3::z(), &(axis / length))
        } else {
            nalgebra::Matrix3::identity()
        };
        let pose = RigidTransform::new(rotation, 0.5 * (a + b), Frame::Object, Frame::Base)?;
        Primitive::new(
            Shape::Capsule {
                half_length: 0.5 * length,
                radius,
            },
            pose,
            material,
            instance,
        )
    }

    /// End points of the axis segment of a capsule or cylinder, in the base
    /// frame.
    pub fn axis_segment(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let h = match self.shape {
            Shape::Capsule { half_length, .. } | Shape::Cylinder { half_length, .. } => half_length,
            _ => return None,
        };
        let half = Vector3::new(0.0, 0.0, h);
        Some((self.pose.transform_point(&-half), self.pose.transform_point(&half)))
    }

    pub fn bounding_sphere(&self) -> Option<(Vector3<f64>, f64)> {
        self.shape.bounding_radius().map(|r| (*self.pose.translation(), r))
    }

    pub fn intersect(&self, ray: &Ray, t_min: f64) -> Option<WorldHit> {
        let r_t = self.pose.rotation().transpose();
        let o = r_t * (ray.origin - self.pose.translation());
        let d = r_t * ray.direction;
        let hit = self.shape.intersect(&o, &d, t_min)?;
        Some(WorldHit {
            t: hit.t,
            normal: self.pose.rotation() * hit.normal,
            albedo: self.material.texture.albedo(&hit.point),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    /// Unit vector pointing from surfaces toward the light.
    pub direction: Vector3<f64>,
    pub intensity: f64,
    pub ambient: f64,
}

impl Lighting {
    pub fn validate(&self) -> Result<()> {
        if (self.direction.norm() - 1.0).abs() > 1e-9 || !(self.intensity > 0.0) || !(self.ambient >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad lighting {self:?}")));
        }
        Ok(())
    }

    /// Lambertian shading of a surface whose normal faces the viewer.
    pub fn shade(&self, albedo: &Rgb, normal: &Vector3<f64>) -> Rgb {
        let k = self.ambient + self.intensity * normal.dot(&self.direction).max(0.0);
        albedo.map(|a| (a * k).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub lighting: Lighting,
    /// Evaluated on the unit ray direction for rays that hit nothing.
    pub background: Arc<dyn TexturePattern>,
}

/// The `z = 0` plane of the base frame with its normal pointing up.
pub fn ground_plane(material: Material) -> Primitive {
    Primitive {
        shape: Shape::Plane,
        pose: RigidTransform::identity(Frame::Base).retagged(Frame::Object, Frame::Base),
        material,
        instance: InstanceId::Background,
    }
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, lighting: Lighting, background: Arc<dyn TexturePattern>) -> Result<Self> {
        lighting.validate()?;
        let planes: Vec<&Primitive> = primitives.iter().filter(|p| p.shape == Shape::Plane).collect();
        let is_ground = |p: &Primitive| {
            p.pose.translation().z.abs() < 1e-12 && (p.pose.rotation().column(2) - Vector3::z()).norm() < 1e-12
        };
        if planes.len() != 1 || !is_ground(planes[0]) {
            return Err(Error::InvalidConfig("scene needs exactly one ground plane at z = 0".into()));
        }
        Ok(Scene {
            primitives,
            lighting,
            background,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lighting() -> Lighting {
        Lighting {
            direction: Vector3::z(),
            intensity: 0.6,
            ambient: 0.3,
        }
    }

    #[test]
    fn scene_requires_one_ground_plane() {
        let gray = Material::solid([0.5; 3]);
        let bg = Arc::new(Solid { color: [0.2; 3] });
        assert!(Scene::new(vec![], lighting(), bg.clone()).is_err());
        assert!(Scene::new(vec![ground_plane(gray.clone())], lighting(), bg.clone()).is_ok());
        assert!(Scene::new(vec![ground_plane(gray.clone()), ground_plane(gray)], lighting(), bg).is_err());
    }

    #[test]
    fn capsule_between_spans_its_end_points() {
        let a = Vector3::new(0.1, 0.2, 0.3);
        let b = Vector3::new(-0.4, 0.5, 0.9);
        let c = Primitive::capsule_between(&a, &b, 0.05, Material::solid([0.5; 3]), InstanceId::Robot).unwrap();
        let (p, q) = c.axis_segment().unwrap();
        assert!((p - a).norm() < 1e-12 && (q - b).norm() < 1e-12);
    }

    #[test]
    fn shading_clamps_and_ignores_back_light() {
        let l = lighting();
        assert_eq!(l.shade(&[1.0; 3], &Vector3::z()), [0.3 + 0.6; 3]);
        assert_eq!(l.shade(&[1.0; 3], &-Vector3::z()), [0.3; 3]);
        let bright = Lighting { intensity: 2.0, ..l };
        assert_eq!(bright.shade(&[1.0; 3], &Vector3::z()), [1.0; 3]);
    }
}
