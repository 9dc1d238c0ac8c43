//! Random lighting, textures, distractors and screwdriver choice.

use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{ClothStyle, ScrewdriverSpec};
use super::scene::{ground_plane, InstanceId, Lighting, Material, Primitive, Scene};
use super::shapes::Shape;
use super::texture::{TexturePattern, TextureRanges, TextureRegistry};
use crate::error::{Error, Result};
use crate::se3::{rot_z, Frame, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    RobotVisible,
    RobotClothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClothConfig {
    pub albedo: [f64; 3],
    /// Radius added to every clothed link (m).
    pub inflation: f64,
    pub clothe_holder: bool,
}

impl Default for ClothConfig {
    fn default() -> Self {
        ClothConfig {
            albedo: [0.25, 0.3, 0.4],
            inflation: 0.01,
            clothe_holder: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneRandomization {
    pub light_intensity: [f64; 2],
    pub ambient: [f64; 2],
    /// Light elevation above the table (degrees).
    pub light_elevation_deg: [f64; 2],
    /// The background-for-R+T capture scales the light intensity by
    /// `1 ± jitter`. The robot-only pair shares one lighting draw.
    pub background_lighting_jitter: f64,
    /// Texture kinds drawn for the table, background and distractors.
    pub textures: Vec<String>,
    pub texture_ranges: TextureRanges,
    pub max_distractors: u32,
    /// Table region for distractors: `[x_min, x_max, y_min, y_max]` (m).
    pub distractor_region: [f64; 4],
    /// Characteristic distractor size bounds (m).
    pub distractor_size: [f64; 2],
    pub cloth: ClothConfig,
}

impl Default for SceneRandomization {
    fn default() -> Self {
        SceneRandomization {
            light_intensity: [0.4, 0.7],
            ambient: [0.15, 0.3],
            light_elevation_deg: [35.0, 85.0],
            background_lighting_jitter: 0.1,
            textures: ["solid", "checker", "noise", "stripes"].map(String::from).to_vec(),
            texture_ranges: TextureRanges::default(),
            max_distractors: 4,
            distractor_region: [0.25, 0.85, -0.45, 0.45],
            distractor_size: [0.015, 0.04],
            cloth: ClothConfig::default(),
        }
    }
}

fn ordered(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

impl SceneRandomization {
    pub fn validate(&self, registry: &TextureRegistry) -> Result<()> {
        if !ordered(self.light_intensity) || self.light_intensity[0] <= 0.0 {
            return Err(Error::InvalidConfig("light_intensity must be a positive range".into()));
        }
        if !ordered(self.ambient) || self.ambient[0] < 0.0 {
            return Err(Error::InvalidConfig("ambient must be a non-negative range".into()));
        }
        let e = self.light_elevation_deg;
        if !ordered(e) || e[0] <= 0.0 || e[1] > 90.0 {
            return Err(Error::InvalidConfig("light_elevation_deg must lie in (0, 90]".into()));
        }
        if !(0.0..1.0).contains(&self.background_lighting_jitter) {
            return Err(Error::InvalidConfig("background_lighting_jitter must be in [0, 1)".into()));
        }
        if self.textures.is_empty() {
            return Err(Error::InvalidConfig("at least one texture kind is required".into()));
        }
        for name in &self.textures {
            if !registry.contains(name) {
                return Err(Error::UnknownName {
                    kind: "texture",
                    name: name.clone(),
                });
            }
        }
        self.texture_ranges.validate()?;
        let r = self.distractor_region;
        if !(ordered([r[0], r[1]]) && ordered([r[2], r[3]])) {
            return Err(Error::InvalidConfig("distractor_region must be [x_min, x_max, y_min, y_max]".into()));
        }
        if !ordered(self.distractor_size) || self.distractor_size[0] <= 0.0 {
            return Err(Error::InvalidConfig("distractor_size must be a positive range".into()));
        }
        if self.cloth.inflation < 0.0 {
            return Err(Error::InvalidConfig("cloth inflation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything drawn for one sample before the robot and tool are placed.
#[derive(Debug, Clone)]
pub struct SceneDraw {
    pub mode: RenderMode,
    /// Ground plane followed by the distractors.
    pub environment: Vec<Primitive>,
    pub lighting: Lighting,
    /// Lighting of the background-for-R+T capture. The R+T, robot-only and
    /// background-for-RO captures use `lighting`.
    pub background_rt_lighting: Lighting,
    pub background: Arc<dyn TexturePattern>,
    pub table_texture: String,
    pub distractor_count: u32,
    /// Index into the screwdriver catalog.
    pub screwdriver: usize,
    pub cloth: Option<ClothStyle>,
}

impl SceneDraw {
    /// Full scene with the given robot links and tool primitives.
    pub fn assemble(&self, robot: Vec<Primitive>, tool: Vec<Primitive>) -> Result<Scene> {
        self.assemble_dressed(self.dress(robot), tool)
    }

    /// Robot links as rendered in this draw's mode.
    pub fn dress(&self, mut robot: Vec<Primitive>) -> Vec<Primitive> {
        if let Some(cloth) = &self.cloth {
            cloth.apply(&mut robot);
        }
        robot
    }

    /// Like [`SceneDraw::assemble`] for links already passed through [`SceneDraw::dress`].
    pub fn assemble_dressed(&self, robot: Vec<Primitive>, tool: Vec<Primitive>) -> Result<Scene> {
        let mut prims = self.environment.clone();
        prims.extend(robot);
        prims.extend(tool);
        Scene::new(prims, self.lighting, self.background.clone())
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn random_distractor(rng: &mut ChaCha8Rng, cfg: &SceneRandomization, registry: &TextureRegistry, k: u16) -> Result<Primitive> {
    let size = uniform(rng, cfg.distractor_size);
    let (shape, height) = match rng.random_range(0..4u8) {
        0 => (Shape::Sphere { radius: size }, size),
        1 => (
            Shape::Capsule {
                half_length: size,
                radius: 0.5 * size,
            },
            0.5 * size,
        ),
        2 => (
            Shape::Cylinder {
                half_length: 0.5 * size,
                radius: size,
            },
            0.5 * size,
        ),
        _ => (
            Shape::Box {
                half_extents: Vector3::new(size, 0.7 * size, 0.5 * size),
            },
            0.5 * size,
        ),
    };
    // Capsules lie on their side; everything else stands upright.
    let tip_over = if matches!(shape, Shape::Capsule { .. }) {
        crate::se3::rot_x(std::f64::consts::FRAC_PI_2)
    } else {
        nalgebra::Matrix3::identity()
    };
    let r = cfg.distractor_region;
    let position = Vector3::new(uniform(rng, [r[0], r[1]]), uniform(rng, [r[2], r[3]]), height);
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    let pose = RigidTransform::new(rot_z(yaw) * tip_over, position, Frame::Object, Frame::Base)?;
    let name = &cfg.textures[rng.random_range(0..cfg.textures.len())];
    let material = Material {
        texture: registry.create(name, rng, &cfg.texture_ranges)?,
    };
    Primitive::new(shape, pose, material, InstanceId::Distractor(k))
}

/// Draws lighting, textures, distractors and a screwdriver for one sample.
pub fn randomize_scene(
    rng: &mut ChaCha8Rng,
    cfg: &SceneRandomization,
    registry: &TextureRegistry,
    screwdrivers: &[ScrewdriverSpec],
    mode: RenderMode,
) -> Result<SceneDraw> {
    if screwdrivers.is_empty() {
        return Err(Error::InvalidConfig("screwdriver catalog is empty".into()));
    }
    let elevation = uniform(rng, cfg.light_elevation_deg).to_radians();
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let lighting = Lighting {
        direction: Vector3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin()),
        intensity: uniform(rng, cfg.light_intensity),
        ambient: uniform(rng, cfg.ambient),
    };
    let jitter = cfg.background_lighting_jitter;
    let background_rt_lighting = Lighting {
        intensity: lighting.intensity * uniform(rng, [1.0 - jitter, 1.0 + jitter]),
        ..lighting
    };

    let table_texture = cfg.textures[rng.random_range(0..cfg.textures.len())].clone();
    let table = registry.create(&table_texture, rng, &cfg.texture_ranges)?;
    let bg_name = &cfg.textures[rng.random_range(0..cfg.textures.len())];
    let background = registry.create(bg_name, rng, &cfg.texture_ranges)?;

    let distractor_count = rng.random_range(0..=cfg.max_distractors);
    let mut environment = vec![ground_plane(Material { texture: table })];
    for k in 0..distractor_count {
        environment.push(random_distractor(rng, cfg, registry, k as u16)?);
    }

    let screwdriver = rng.random_range(0..screwdrivers.len());
    let cloth = (mode == RenderMode::RobotClothed).then(|| ClothStyle {
        material: Material::solid(cfg.cloth.albedo),
        inflation: cfg.cloth.inflation,
        clothe_holder: cfg.cloth.clothe_holder,
    });

    Ok(SceneDraw {
        mode,
        environment,
        lighting,
        background_rt_lighting,
        background,
        table_texture,
        distractor_count,
        screwdriver,
        cloth,
    })
}
