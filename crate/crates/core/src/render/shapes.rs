//! Analytic ray intersections in each primitive's local frame.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Shape in its local frame. Capsules and cylinders run along local z from
/// `-half_length` to `+half_length`; the plane is `z = 0` with normal `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    Capsule { half_length: f64, radius: f64 },
    Cylinder { half_length: f64, radius: f64 },
    Box { half_extents: Vector3<f64> },
    Plane,
}

/// Nearest intersection in local coordinates; `normal` is the outward unit
/// surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalHit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Roots of `a t² + 2 b t + c = 0`, ascending.
fn quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let q = -(b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    let (t1, t2) = (q / a, c / q);
    Some((t1.min(t2), t1.max(t2)))
}

fn first_root_after(roots: Option<(f64, f64)>, t_min: f64, accept: impl Fn(f64) -> bool) -> Option<f64> {
    let (t1, t2) = roots?;
    [t1, t2].into_iter().find(|t| *t > t_min && accept(*t))
}

fn sphere_hit(center: Vector3<f64>, radius: f64, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64) -> Option<LocalHit> {
    let oc = o - center;
    let t = first_root_after(quadratic(d.dot(d), oc.dot(d), oc.dot(&oc) - radius * radius), t_min, |_| true)?;
    let point = o + d * t;
    Some(LocalHit {
        t,
        point,
        normal: (point - center) / radius,
    })
}

/// Side of the z-aligned infinite cylinder, restricted to `|z| ≤ half_length`.
fn tube_hit(half_length: f64, radius: f64, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64) -> Option<LocalHit> {
    let a = d.x * d.x + d.y * d.y;
    let b = o.x * d.x + o.y * d.y;
    let c = o.x * o.x + o.y * o.y - radius * radius;
    let t = first_root_after(quadratic(a, b, c), t_min, |t| (o.z + t * d.z).abs() <= half_length)?;
    let point = o + d * t;
    Some(LocalHit {
        t,
        point,
        normal: Vector3::new(point.x, point.y, 0.0) / radius,
    })
}

fn disk_hit(z: f64, normal_z: f64, radius: f64, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64) -> Option<LocalHit> {
    if d.z == 0.0 {
        return None;
    }
    let t = (z - o.z) / d.z;
    if t <= t_min {
        return None;
    }
    let point = o + d * t;
    (point.x * point.x + point.y * point.y <= radius * radius).then(|| LocalHit {
        t,
        point: Vector3::new(point.x, point.y, z),
        normal: Vector3::new(0.0, 0.0, normal_z),
    })
}

fn nearest(hits: impl IntoIterator<Item = Option<LocalHit>>) -> Option<LocalHit> {
    hits.into_iter().flatten().min_by(|a, b| a.t.total_cmp(&b.t))
}

impl Shape {
    /// First intersection with `t > t_min` of the local ray `o + t·d`.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64) -> Option<LocalHit> {
        match *self {
            Shape::Sphere { radius } => sphere_hit(Vector3::zeros(), radius, o, d, t_min),
            // A capsule is the union of a tube and two end spheres; for a
            // ray starting outside, its first entry is the earliest entry of
            // any of the three convex pieces.
            Shape::Capsule { half_length, radius } => {
                let cap = Vector3::new(0.0, 0.0, half_length);
                nearest([
                    tube_hit(half_length, radius, o, d, t_min),
                    sphere_hit(cap, radius, o, d, t_min),
                    sphere_hit(-cap, radius, o, d, t_min),
                ])
            }
            Shape::Cylinder { half_length, radius } => nearest([
                tube_hit(half_length, radius, o, d, t_min),
                disk_hit(half_length, 1.0, radius, o, d, t_min),
                disk_hit(-half_length, -1.0, radius, o, d, t_min),
            ]),
            Shape::Box { half_extents } => box_hit(&half_extents, o, d, t_min),
            Shape::Plane => {
                if d.z == 0.0 {
                    return None;
                }
                let t = -o.z / d.z;
                (t > t_min).then(|| {
                    let p = o + d * t;
                    LocalHit {
                        t,
                        point: Vector3::new(p.x, p.y, 0.0),
                        normal: Vector3::z(),
                    }
                })
            }
        }
    }

    /// Radius of a sphere about the local origin enclosing the shape, or
    /// `None` for the unbounded plane.
    pub fn bounding_radius(&self) -> Option<f64> {
        match *self {
            Shape::Sphere { radius } => Some(radius),
            Shape::Capsule { half_length, radius } => Some(half_length + radius),
            Shape::Cylinder { half_length, radius } => Some(half_length.hypot(radius)),
            Shape::Box { half_extents } => Some(half_extents.norm()),
            Shape::Plane => None,
        }
    }

    pub fn validate(&self) -> bool {
        match *self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Capsule { half_length, radius } => half_length >= 0.0 && radius > 0.0,
            Shape::Cylinder { half_length, radius } => half_length > 0.0 && radius > 0.0,
            Shape::Box { half_extents } => half_extents.iter().all(|h| *h > 0.0),
            Shape::Plane => true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Capsule { .. } => "capsule",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Box { .. } => "box",
            Shape::Plane => "plane",
        }
    }
}

fn box_hit(h: &Vector3<f64>, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64) -> Option<LocalHit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0;
    let mut far_axis = 0;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i].abs() > h[i] {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = ((-h[i] - o[i]) / d[i], (h[i] - o[i]) / d[i]);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_near {
            t_near = t0;
            near_axis = i;
        }
        if t1 < t_far {
            t_far = t1;
            far_axis = i;
        }
    }
    if t_near > t_far {
        return None;
    }
    let (t, axis) = if t_near > t_min {
        (t_near, near_axis)
    } else if t_far > t_min {
        (t_far, far_axis)
    } else {
        return None;
    };
    let point = o + d * t;
    let mut normal = Vector3::zeros();
    normal[axis] = point[axis].signum();
    Some(LocalHit { t, point, normal })
}
