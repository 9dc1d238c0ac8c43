//! Pinhole cameras and the fixed stereo rig.
//!
//! Camera frames follow the usual vision convention: x right, y down, z
//! along the optical axis. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so its
//! center is at `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{Frame, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad camera intrinsics {self:?}")))
        }
    }
}

/// A camera with its pose in the base frame (camera → base).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidTransform,
    /// Near-plane distance along the optical axis (m).
    pub near: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
    pub camera: Frame,
    pub in_bounds: bool,
}

/// A 3-D point tagged with the frame its coordinates are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub coords: Vector3<f64>,
    pub frame: Frame,
}

impl Point3 {
    pub fn base(coords: Vector3<f64>) -> Self {
        Self {
            coords,
            frame: Frame::Base,
        }
    }
}

/// Closed half-space `normal·x ≥ offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn slack(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.slack(p) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    /// Unit direction.
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

/// Camera orientation looking from `position` toward `look_at`, with image
/// "up" as close as possible to `up`.
pub fn look_at_rotation(position: &Vector3<f64>, look_at: &Vector3<f64>, up: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let z = (look_at - position).normalize();
    let x = z.cross(up);
    if !(x.norm() > 1e-9) || !z.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("degenerate camera look-at".into()));
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(Matrix3::from_columns(&[x, y, z]))
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, pose: RigidTransform, near: f64) -> Result<Self> {
        intrinsics.validate()?;
        if pose.to_frame() != Frame::Base {
            return Err(Error::FrameMismatch {
                expected: Frame::Base,
                found: pose.to_frame(),
            });
        }
        if !(near > 0.0) {
            return Err(Error::InvalidConfig("near plane must be positive".into()));
        }
        Ok(Self {
            intrinsics,
            pose,
            near,
        })
    }

    pub fn looking_at(
        intrinsics: CameraIntrinsics,
        frame: Frame,
        position: Vector3<f64>,
        look_at: Vector3<f64>,
        up: Vector3<f64>,
        near: f64,
    ) -> Result<Self> {
        let r = look_at_rotation(&position, &look_at, &up)?;
        Self::new(intrinsics, RigidTransform::new(r, position, frame, Frame::Base)?, near)
    }

    pub fn frame(&self) -> Frame {
        self.pose.from_frame()
    }

    pub fn center(&self) -> Vector3<f64> {
        *self.pose.translation()
    }

    pub fn optical_axis(&self) -> Vector3<f64> {
        self.pose.rotation().column(2).into_owned()
    }

    /// Coordinates of a point in this camera's frame.
    pub fn to_camera(&self, point: &Point3) -> Result<Vector3<f64>> {
        if point.frame == self.frame() {
            Ok(point.coords)
        } else if point.frame == Frame::Base {
            Ok(self.pose.inverse().transform_point(&point.coords))
        } else {
            Err(Error::FrameMismatch {
                expected: Frame::Base,
                found: point.frame,
            })
        }
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        let k = &self.intrinsics;
        u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64
    }

    pub fn project(&self, point: &Point3) -> Result<PixelPoint> {
        let pc = self.to_camera(point)?;
        if !pc.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite point".into()));
        }
        if pc.z <= self.near {
            return Err(Error::BehindCamera { depth: pc.z });
        }
        let k = &self.intrinsics;
        let u = k.fx * pc.x / pc.z + k.cx;
        let v = k.fy * pc.y / pc.z + k.cy;
        Ok(PixelPoint {
            u,
            v,
            camera: self.frame(),
            in_bounds: self.in_bounds(u, v),
        })
    }

    /// Unit ray in the camera frame through image coordinates `(u, v)`.
    pub fn ray_direction_camera(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalize()
    }

    /// Ray in the base frame through image coordinates `(u, v)`.
    pub fn back_project(&self, u: f64, v: f64) -> Ray {
        Ray {
            origin: self.center(),
            direction: self.pose.rotation() * self.ray_direction_camera(u, v),
        }
    }

    /// The four border planes through the camera center and the near plane,
    /// in the base frame. A point satisfies all five iff it projects inside
    /// the image extent with depth ≥ near.
    pub fn frustum_halfspaces(&self) -> [HalfSpace; 5] {
        let k = &self.intrinsics;
        let (w, h) = (k.width as f64, k.height as f64);
        let r = self.pose.rotation();
        let c = self.center();
        let through_center = |n_cam: Vector3<f64>| {
            let n = (r * n_cam).normalize();
            HalfSpace {
                normal: n,
                offset: n.dot(&c),
            }
        };
        let axis = self.optical_axis();
        [
            // u ≥ 0  ⇔  fx·X + cx·Z ≥ 0
            through_center(Vector3::new(k.fx, 0.0, k.cx)),
            // u ≤ w  ⇔  (w − cx)·Z − fx·X ≥ 0
            through_center(Vector3::new(-k.fx, 0.0, w - k.cx)),
            through_center(Vector3::new(0.0, k.fy, k.cy)),
            through_center(Vector3::new(0.0, -k.fy, h - k.cy)),
            HalfSpace {
                normal: axis,
                offset: axis.dot(&c) + self.near,
            },
        ]
    }
}

/// Two cameras with fixed intrinsics and fixed relative pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub left: Camera,
    pub right: Camera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Point3,
    /// Length of the shortest segment between the two rays (m).
    pub ray_gap: f64,
}

const PARALLEL_RAY_TOLERANCE: f64 = 1e-9;

impl StereoRig {
    pub fn new(left: Camera, right: Camera) -> Result<Self> {
        if left.frame() != Frame::CamLeft || right.frame() != Frame::CamRight {
            return Err(Error::InvalidConfig(
                "rig cameras must be tagged cam_left / cam_right".into(),
            ));
        }
        Ok(Self { left, right })
    }

    pub fn camera(&self, frame: Frame) -> Result<&Camera> {
        match frame {
            Frame::CamLeft => Ok(&self.left),
            Frame::CamRight => Ok(&self.right),
            other => Err(Error::FrameMismatch {
                expected: Frame::CamLeft,
                found: other,
            }),
        }
    }

    /// Right camera pose expressed in the left camera frame.
    pub fn relative_pose(&self) -> RigidTransform {
        self.left
            .pose
            .inverse()
            .compose(&self.right.pose)
            .expect("both poses map into the base frame")
    }

    pub fn halfspaces(&self) -> Vec<HalfSpace> {
        self.left
            .frustum_halfspaces()
            .into_iter()
            .chain(self.right.frustum_halfspaces())
            .collect()
    }

    /// Ray-midpoint triangulation; the result is in the base frame.
    pub fn triangulate(&self, left: &PixelPoint, right: &PixelPoint) -> Result<Triangulation> {
        for (p, want) in [(left, Frame::CamLeft), (right, Frame::CamRight)] {
            if p.camera != want {
                return Err(Error::FrameMismatch {
                    expected: want,
                    found: p.camera,
                });
            }
        }
        let r1 = self.left.back_project(left.u, left.v);
        let r2 = self.right.back_project(right.u, right.v);
        let cross = r1.direction.cross(&r2.direction).norm();
        if cross.asin() < PARALLEL_RAY_TOLERANCE {
            return Err(Error::DegenerateRays);
        }
        let w0 = r1.origin - r2.origin;
        let b = r1.direction.dot(&r2.direction);
        let d = r1.direction.dot(&w0);
        let e = r2.direction.dot(&w0);
        let denom = 1.0 - b * b;
        let s = (b * e - d) / denom;
        let t = (e - b * d) / denom;
        let p1 = r1.at(s);
        let p2 = r2.at(t);
        Ok(Triangulation {
            point: Point3::base(0.5 * (p1 + p2)),
            ray_gap: (p1 - p2).norm(),
        })
    }

    /// Baseline (m) if the rig is rectified: identical intrinsics, identical
    /// orientation and a pure +x offset of the right camera.
    pub fn rectified_baseline(&self) -> Result<f64> {
        let rel = self.relative_pose();
        let t = rel.translation();
        let (a, b) = (&self.left.intrinsics, &self.right.intrinsics);
        if (rel.rotation() - Matrix3::identity()).abs().max() > 1e-9 {
            return Err(Error::NonRectifiedRig("cameras are not parallel".into()));
        }
        if t.y.abs() > 1e-9 || t.z.abs() > 1e-9 || t.x <= 0.0 {
            return Err(Error::NonRectifiedRig(
                "right camera is not offset along +x".into(),
            ));
        }
        if a != b {
            return Err(Error::NonRectifiedRig("intrinsics differ".into()));
        }
        Ok(t.x)
    }
}

/// Free-function form of [`Camera::project`].
pub fn project(camera: &Camera, point: &Point3) -> Result<PixelPoint> {
    camera.project(point)
}

/// Re-expresses a point through `t`; the point must be in `t.from_frame()`.
pub fn change_frame(point: &Point3, t: &RigidTransform) -> Result<Point3> {
    if point.frame != t.from_frame() {
        return Err(Error::FrameMismatch {
            expected: t.from_frame(),
            found: point.frame,
        });
    }
    Ok(Point3 {
        coords: t.transform_point(&point.coords),
        frame: t.to_frame(),
    })
}

#[cfg(test)]
pub(crate) mod test_rigs {
    use super::*;

    pub fn intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 320.0,
            fy: 320.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
        }
    }

    /// Two cameras looking along base +y, right camera offset along +x.
    pub fn fronto_parallel(baseline: f64) -> StereoRig {
        let r = Matrix3::from_columns(&[Vector3::x(), -Vector3::z(), Vector3::y()]);
        let left = Camera::new(
            intrinsics(),
            RigidTransform::new(r, Vector3::new(0.0, 0.0, 0.5), Frame::CamLeft, Frame::Base).unwrap(),
            0.05,
        )
        .unwrap();
        let right = Camera::new(
            intrinsics(),
            RigidTransform::new(r, Vector3::new(baseline, 0.0, 0.5), Frame::CamRight, Frame::Base).unwrap(),
            0.05,
        )
        .unwrap();
        StereoRig::new(left, right).unwrap()
    }

    /// Cameras at y = ±half_baseline converging on a point on the x–z plane.
    pub fn symmetric_converging(half_baseline: f64, position_x: f64, height: f64, fixation: Vector3<f64>) -> StereoRig {
        let cam = |frame, y: f64| {
            Camera::looking_at(
                intrinsics(),
                frame,
                Vector3::new(position_x, y, height),
                fixation,
                Vector3::z(),
                0.05,
            )
            .unwrap()
        };
        StereoRig::new(cam(Frame::CamLeft, half_baseline), cam(Frame::CamRight, -half_baseline)).unwrap()
    }
}
