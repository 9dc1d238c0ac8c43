//! Rejection checks applied to each candidate sample.
//!
//! Checks implement [`SampleCheck`] and are looked up by name in a
//! [`CheckRegistry`], so the set that runs is chosen by configuration.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{Point3, StereoRig};
use crate::error::{Error, Result};
use crate::imaging::BinaryMask;
use crate::removal::dilate;
use crate::render::raycast::{Layers, Trace};
use crate::render::scene::{InstanceId, Primitive};
use crate::render::shapes::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    Unreachable,
    OutOfView,
    Occluded,
    Collision,
    MaskOverlap,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 5] = [
        RejectionReason::Unreachable,
        RejectionReason::OutOfView,
        RejectionReason::Occluded,
        RejectionReason::Collision,
        RejectionReason::MaskOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RejectionReason::Unreachable => "unreachable",
            RejectionReason::OutOfView => "out_of_view",
            RejectionReason::Occluded => "occluded",
            RejectionReason::Collision => "collision",
            RejectionReason::MaskOverlap => "mask_overlap",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Line segment with a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn from_primitive(p: &Primitive) -> Option<Capsule> {
        let radius = match p.shape {
            Shape::Capsule { radius, .. } | Shape::Cylinder { radius, .. } => radius,
            _ => return None,
        };
        let (a, b) = p.axis_segment()?;
        Some(Capsule { a, b, radius })
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    let t = if len_sq > 0.0 { ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Shortest distance between segments `p1q1` and `p2q2`.
pub fn segment_distance(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;
    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Static obstacles for the collision check besides the table plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Everything a check may look at for one candidate.
pub struct CheckInput<'a> {
    pub rig: &'a StereoRig,
    /// Robot primitives as rendered, in link order; the last is the holder.
    pub robot: &'a [Primitive],
    /// Robot links at their kinematic radii, in link order.
    pub links: &'a [Capsule],
    pub tool: &'a [Primitive],
    /// Tool axis from the tip to the back end of the handle.
    pub tool_axis: (Vector3<f64>, Vector3<f64>),
    pub tool_radius: f64,
    pub obstacles: &'a [Obstacle],
    pub margin: f64,
    /// Traces of the full scene for both cameras, for image-space checks.
    pub traces: Option<&'a [Trace; 2]>,
    /// Scene index of the first robot primitive in the traces.
    pub robot_offset: usize,
    pub mask_radius: u32,
}

pub trait SampleCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn reason(&self) -> RejectionReason;
    /// Whether the check reads `CheckInput::traces`.
    fn needs_render(&self) -> bool {
        false
    }
    /// `true` when the candidate passes.
    fn check(&self, input: &CheckInput<'_>) -> bool;
}

/// Tip and both ends of the tool project inside both images in front of
/// the near plane.
pub struct Visibility;

impl SampleCheck for Visibility {
    fn name(&self) -> &'static str {
        "visibility"
    }

    fn reason(&self) -> RejectionReason {
        RejectionReason::OutOfView
    }

    fn check(&self, input: &CheckInput<'_>) -> bool {
        let (tip, back) = input.tool_axis;
        [input.rig.left.clone(), input.rig.right.clone()].iter().all(|cam| {
            [tip, back].iter().all(|p| cam.project(&Point3::base(*p)).is_ok_and(|px| px.in_bounds))
        })
    }
}

/// Points sampled along the tool are not hidden by any robot primitive
/// other than the tool holder, in either camera.
pub struct Occlusion;

pub const OCCLUSION_SAMPLES: usize = 9;

/// Sample points from the tip toward the handle, stopping short of the
/// holder so that the holder capsule (which the handle sits in) does not
/// count as hiding the tool.
pub fn occlusion_points(input: &CheckInput<'_>) -> Vec<Vector3<f64>> {
    let (tip, back) = input.tool_axis;
    let axis = back - tip;
    let holder_radius = input.robot.last().and_then(|p| Capsule::from_primitive(p)).map_or(0.0, |c| c.radius);
    let usable = (axis.norm() - holder_radius - input.margin).max(0.0) / axis.norm();
    (0..OCCLUSION_SAMPLES)
        .map(|k| tip + axis * (usable * k as f64 / (OCCLUSION_SAMPLES - 1) as f64))
        .collect()
}

impl SampleCheck for Occlusion {
    fn name(&self) -> &'static str {
        "occlusion"
    }

    fn reason(&self) -> RejectionReason {
        RejectionReason::Occluded
    }

    fn check(&self, input: &CheckInput<'_>) -> bool {
        let points = occlusion_points(input);
        [&input.rig.left, &input.rig.right].iter().all(|cam| {
            let origin = cam.center();
            points.iter().all(|p| {
                let to = p - origin;
                let dist = to.norm();
                let ray = crate::camera::Ray {
                    origin,
                    direction: to / dist,
                };
                let links = &input.robot[..input.robot.len().saturating_sub(1)];
                links.iter().all(|r| r.intersect(&ray, 0.0).is_none_or(|h| h.t >= dist))
            })
        })
    }
}

/// Self-collision between non-adjacent links (the tool counts as a final
/// link), links against the table plane, camera keep-out spheres and
/// distractors.
pub struct Collision;

impl Collision {
    fn bodies(input: &CheckInput<'_>) -> Vec<Capsule> {
        let mut bodies = input.links.to_vec();
        bodies.push(Capsule {
            a: input.tool_axis.0,
            b: input.tool_axis.1,
            radius: input.tool_radius,
        });
        bodies
    }
}

impl SampleCheck for Collision {
    fn name(&self) -> &'static str {
        "collision"
    }

    fn reason(&self) -> RejectionReason {
        RejectionReason::Collision
    }

    fn check(&self, input: &CheckInput<'_>) -> bool {
        let bodies = Self::bodies(input);
        let m = input.margin;
        for i in 0..bodies.len() {
            for j in (i + 2)..bodies.len() {
                // Links separated only by zero-length links share a joint.
                let between: f64 = bodies[i + 1..j].iter().map(Capsule::length).sum();
                if between <= 1e-12 {
                    continue;
                }
                let (u, v) = (&bodies[i], &bodies[j]);
                if segment_distance(&u.a, &u.b, &v.a, &v.b) <= u.radius + v.radius + m {
                    return false;
                }
            }
        }
        // The base link stands on the table.
        let above_table = bodies.iter().skip(1).all(|c| c.a.z.min(c.b.z) - c.radius > m);
        let keep_clear = |center: &Vector3<f64>, radius: f64| {
            bodies.iter().all(|c| point_segment_distance(center, &c.a, &c.b) > c.radius + radius + m)
        };
        above_table && input.obstacles.iter().all(|o| keep_clear(&o.center, o.radius))
    }
}

/// In both images, the robot silhouette (without the tool holder) dilated
/// by the mask radius does not touch the tool silhouette.
pub struct MaskOverlap;

/// Robot pixels of the robot-only view, excluding the holder, and tool
/// pixels of the full view.
pub fn overlap_masks(trace: &Trace, input: &CheckInput<'_>) -> (BinaryMask, BinaryMask) {
    let holder = (input.robot_offset + input.robot.len() - 1) as u32;
    let robot_range = input.robot_offset as u32..holder;
    let robot = BinaryMask::from_fn(trace.width(), trace.height(), |x, y| {
        trace.primitive_at(x, y, Layers::ROBOT_ONLY).is_some_and(|i| robot_range.contains(&i))
    });
    let ids = trace.id_map(Layers::ALL);
    let tool = BinaryMask::from_fn(trace.width(), trace.height(), |x, y| ids.get_pixel(x, y).0[0] == InstanceId::Tool.code());
    (robot, tool)
}

pub fn masks_overlap(robot: &BinaryMask, tool: &BinaryMask, radius: u32) -> bool {
    dilate(robot, radius).intersects(tool)
}

impl SampleCheck for MaskOverlap {
    fn name(&self) -> &'static str {
        "mask_overlap"
    }

    fn reason(&self) -> RejectionReason {
        RejectionReason::MaskOverlap
    }

    fn needs_render(&self) -> bool {
        true
    }

    fn check(&self, input: &CheckInput<'_>) -> bool {
        let Some(traces) = input.traces else {
            return false;
        };
        traces.iter().all(|t| {
            let (robot, tool) = overlap_masks(t, input);
            !masks_overlap(&robot, &tool, input.mask_radius)
        })
    }
}

/// Name → check table.
pub struct CheckRegistry {
    checks: BTreeMap<String, Box<dyn SampleCheck>>,
}

impl Default for CheckRegistry {
    fn default() -> Self {
        let mut r = CheckRegistry { checks: BTreeMap::new() };
        r.register(Box::new(Visibility));
        r.register(Box::new(Occlusion));
        r.register(Box::new(Collision));
        r.register(Box::new(MaskOverlap));
        r
    }
}

impl CheckRegistry {
    pub fn register(&mut self, check: Box<dyn SampleCheck>) {
        self.checks.insert(check.name().to_string(), check);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.checks.keys().map(String::as_str)
    }

    /// Resolves `names` in order, geometric checks first and image-space
    /// checks last.
    pub fn select(&self, names: &[String]) -> Result<Vec<&dyn SampleCheck>> {
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let check = self.checks.get(name).ok_or_else(|| Error::UnknownName {
                kind: "check",
                name: name.clone(),
            })?;
            out.push(check.as_ref());
        }
        out.sort_by_key(|c| c.needs_render());
        Ok(out)
    }
}
