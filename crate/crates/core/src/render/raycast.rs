//! Primary-ray casting with per-layer nearest hits.
//!
//! One trace per camera keeps the nearest environment, robot and tool hit
//! of every pixel, so the scene variants of the capture protocol (with or
//! without robot and tool, under different lighting) are composed from the
//! same trace instead of re-casting rays.

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use nalgebra::Vector3;
use rayon::prelude::*;

use super::scene::{InstanceId, Lighting, Scene};
use super::texture;
use crate::camera::Camera;

pub type IdMap = ImageBuffer<Luma<u16>, Vec<u16>>;

const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Environment = 0,
    Robot = 1,
    Tool = 2,
}

impl Layer {
    pub fn of(instance: InstanceId) -> Layer {
        match instance {
            InstanceId::Robot => Layer::Robot,
            InstanceId::Tool => Layer::Tool,
            InstanceId::Background | InstanceId::Distractor(_) => Layer::Environment,
        }
    }
}

/// Which layers take part in a composed view. The environment is always in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layers {
    pub robot: bool,
    pub tool: bool,
}

impl Layers {
    pub const ALL: Layers = Layers { robot: true, tool: true };
    pub const ROBOT_ONLY: Layers = Layers { robot: true, tool: false };
    pub const BACKGROUND: Layers = Layers { robot: false, tool: false };

    fn includes(&self, layer: usize) -> bool {
        match layer {
            1 => self.robot,
            2 => self.tool,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub primitive: u32,
    /// Unit normal facing the camera.
    pub normal: Vector3<f64>,
    pub albedo: texture::Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PixelTrace {
    layers: [Option<Hit>; 3],
    background: texture::Rgb,
}

#[derive(Debug, Clone)]
pub struct Trace {
    width: u32,
    height: u32,
    pixels: Vec<PixelTrace>,
    instances: Vec<InstanceId>,
}

pub struct RenderOutput {
    pub color: RgbImage,
    pub ids: IdMap,
}

/// Conservative pixel bounding box of a sphere, or `None` if it cannot be
/// bounded (sphere reaching behind the camera center).
fn pixel_bounds(camera: &Camera, center: &Vector3<f64>, radius: f64) -> Option<[f64; 4]> {
    let c = camera.pose.inverse().transform_point(center);
    if c.z - radius <= 1e-6 {
        return None;
    }
    let (lo, hi) = (c.z - radius, c.z + radius);
    let max_ratio = |m: f64| if m >= 0.0 { m / lo } else { m / hi };
    let min_ratio = |m: f64| if m <= 0.0 { m / lo } else { m / hi };
    let k = &camera.intrinsics;
    Some([
        k.fx * min_ratio(c.x - radius) + k.cx,
        k.fx * max_ratio(c.x + radius) + k.cx,
        k.fy * min_ratio(c.y - radius) + k.cy,
        k.fy * max_ratio(c.y + radius) + k.cy,
    ])
}

/// Casts one ray through each pixel center and records the nearest hit per
/// layer. Rows are processed in parallel; the result does not depend on
/// the number of threads.
pub fn trace(scene: &Scene, camera: &Camera) -> Trace {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    // Candidate primitives per pixel come from conservative screen boxes;
    // one extra pixel of margin absorbs rounding at the box edges.
    let bounds: Vec<Option<[f64; 4]>> = scene
        .primitives
        .iter()
        .map(|p| p.bounding_sphere().and_then(|(c, r)| pixel_bounds(camera, &c, r)))
        .map(|b| b.map(|[u0, u1, v0, v1]| [u0 - 1.0, u1 + 1.0, v0 - 1.0, v1 + 1.0]))
        .collect();
    let layers: Vec<usize> = scene.primitives.iter().map(|p| Layer::of(p.instance) as usize).collect();

    let rows: Vec<Vec<PixelTrace>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let v = y as f64 + 0.5;
            let row_candidates: Vec<usize> = (0..scene.primitives.len())
                .filter(|&i| bounds[i].is_none_or(|b| v >= b[2] && v <= b[3]))
                .collect();
            (0..w)
                .map(|x| {
                    let u = x as f64 + 0.5;
                    let ray = camera.back_project(u, v);
                    let mut px = PixelTrace {
                        layers: [None; 3],
                        background: scene.background.albedo(&ray.direction),
                    };
                    for &i in &row_candidates {
                        if let Some(b) = bounds[i] {
                            if u < b[0] || u > b[1] {
                                continue;
                            }
                        }
                        let Some(hit) = scene.primitives[i].intersect(&ray, T_MIN) else {
                            continue;
                        };
                        let slot = &mut px.layers[layers[i]];
                        if slot.is_none_or(|s| hit.t < s.t) {
                            let normal = if hit.normal.dot(&ray.direction) > 0.0 { -hit.normal } else { hit.normal };
                            *slot = Some(Hit {
                                t: hit.t,
                                primitive: i as u32,
                                normal,
                                albedo: hit.albedo,
                            });
                        }
                    }
                    px
                })
                .collect()
        })
        .collect();

    Trace {
        width: w,
        height: h,
        pixels: rows.into_iter().flatten().collect(),
        instances: scene.primitives.iter().map(|p| p.instance).collect(),
    }
}

fn quantize(c: &texture::Rgb) -> Rgb<u8> {
    Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
}

impl Trace {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Nearest hit over the included layers; ties keep the lower layer.
    pub fn nearest(&self, x: u32, y: u32, layers: Layers) -> Option<&Hit> {
        let px = &self.pixels[(y * self.width + x) as usize];
        px.layers
            .iter()
            .enumerate()
            .filter(|(l, _)| layers.includes(*l))
            .filter_map(|(_, h)| h.as_ref())
            .fold(None, |best: Option<&Hit>, h| match best {
                Some(b) if b.t <= h.t => Some(b),
                _ => Some(h),
            })
    }

    /// 8-bit image of the composed view under `lighting`.
    pub fn shade(&self, lighting: &Lighting, layers: Layers) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| match self.nearest(x, y, layers) {
            Some(h) => quantize(&lighting.shade(&h.albedo, &h.normal)),
            None => quantize(&self.pixels[(y * self.width + x) as usize].background),
        })
    }

    /// Per-pixel index of the visible primitive in the composed view.
    pub fn primitive_at(&self, x: u32, y: u32, layers: Layers) -> Option<u32> {
        self.nearest(x, y, layers).map(|h| h.primitive)
    }

    pub fn id_map(&self, layers: Layers) -> IdMap {
        IdMap::from_fn(self.width, self.height, |x, y| {
            Luma([self
                .primitive_at(x, y, layers)
                .map_or(InstanceId::Background.code(), |i| self.instances[i as usize].code())])
        })
    }
}

/// Renders the full scene under its own lighting.
pub fn render(scene: &Scene, camera: &Camera) -> RenderOutput {
    let t = trace(scene, camera);
    RenderOutput {
        color: t.shade(&scene.lighting, Layers::ALL),
        ids: t.id_map(Layers::ALL),
    }
}
