//! Generation config, read from TOML. Every key is optional; unknown keys
//! are rejected.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::checks::CheckRegistry;
use crate::camera::{Camera, CameraIntrinsics, StereoRig};
use crate::cuboid::{largest_common_cuboid, Cuboid};
use crate::error::{Error, Result};
use crate::kinematics::{IkOptions, KinematicChain};
use crate::removal::RemovalParams;
use crate::render::geometry::ScrewdriverSpec;
use crate::render::randomize::SceneRandomization;
use crate::render::texture::TextureRegistry;
use crate::se3::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPlacement {
    pub position: Vector3<f64>,
    pub look_at: Vector3<f64>,
    pub up: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub intrinsics: CameraIntrinsics,
    pub near: f64,
    pub left: CameraPlacement,
    pub right: CameraPlacement,
}

impl Default for RigConfig {
    fn default() -> Self {
        let look_at = Vector3::new(0.5, 0.0, 0.2);
        let place = |x: f64| CameraPlacement {
            position: Vector3::new(x, -1.2, 0.75),
            look_at,
            up: Vector3::z(),
        };
        RigConfig {
            intrinsics: CameraIntrinsics {
                fx: 320.0,
                fy: 320.0,
                cx: 160.0,
                cy: 120.0,
                width: 320,
                height: 240,
            },
            near: 0.05,
            // Looking along +y from the robot's side, image right is base +x.
            left: place(0.2),
            right: place(0.8),
        }
    }
}

impl RigConfig {
    pub fn build(&self) -> Result<StereoRig> {
        let cam = |frame, p: &CameraPlacement| Camera::looking_at(self.intrinsics, frame, p.position, p.look_at, p.up, self.near);
        StereoRig::new(cam(Frame::CamLeft, &self.left)?, cam(Frame::CamRight, &self.right)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    /// Required clearance between bodies (m).
    pub margin: f64,
    /// Radius of the keep-out sphere around each camera center (m).
    pub camera_keepout: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig {
            margin: 0.005,
            camera_keepout: 0.15,
        }
    }
}

fn default_screwdrivers() -> Vec<ScrewdriverSpec> {
    let sd = |id: &str, shaft_length, shaft_radius, handle_length, handle_radius, handle_albedo| ScrewdriverSpec {
        id: id.to_string(),
        shaft_length,
        shaft_radius,
        handle_length,
        handle_radius,
        handle_albedo,
        shaft_albedo: [0.75, 0.75, 0.78],
    };
    vec![
        sd("flat_small", 0.075, 0.0025, 0.09, 0.012, [0.85, 0.12, 0.1]),
        sd("flat_large", 0.1, 0.0035, 0.11, 0.015, [0.95, 0.8, 0.1]),
        sd("phillips_medium", 0.09, 0.003, 0.1, 0.014, [0.1, 0.35, 0.9]),
        sd("torx_long", 0.125, 0.003, 0.1, 0.013, [0.1, 0.7, 0.25]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub seed: u64,
    pub samples: usize,
    /// Largest tool tilt away from pointing straight down (degrees).
    pub max_tilt_deg: f64,
    pub fraction_clothed: f64,
    /// Fraction of samples whose primary image is the robot-free composite.
    pub fraction_composited_only: f64,
    /// Random IK restarts after the home seed.
    pub ik_restarts: usize,
    /// Checks run on every candidate, by name.
    pub checks: Vec<String>,
    pub chain: KinematicChain,
    /// Joint vector tried first as IK seed.
    pub home: [f64; 7],
    pub ik: IkOptions,
    pub rig: RigConfig,
    /// Region the tool tip may occupy, intersected with the common view.
    pub workspace: Cuboid,
    pub collision: CollisionConfig,
    pub removal: RemovalParams,
    pub scene: SceneRandomization,
    pub screwdrivers: Vec<ScrewdriverSpec>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: 1,
            samples: 3000,
            max_tilt_deg: 30.0,
            fraction_clothed: 0.25,
            fraction_composited_only: 0.5,
            ik_restarts: 4,
            checks: ["visibility", "occlusion", "collision", "mask_overlap"].map(String::from).to_vec(),
            chain: KinematicChain::default(),
            home: [0.0, 0.6, 0.0, -1.4, 0.0, 1.1, 0.0],
            ik: IkOptions {
                position_tolerance: 1e-12,
                orientation_tolerance: 1e-12,
                ..IkOptions::default()
            },
            rig: RigConfig::default(),
            workspace: Cuboid {
                min_corner: Vector3::new(0.42, -0.3, 0.03),
                max_corner: Vector3::new(0.7, 0.3, 0.28),
            },
            collision: CollisionConfig::default(),
            removal: RemovalParams::default(),
            scene: SceneRandomization::default(),
            screwdrivers: default_screwdrivers(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl GenerationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GenerationConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples must be positive"));
        }
        for (name, f) in [("fraction_clothed", self.fraction_clothed), ("fraction_composited_only", self.fraction_composited_only)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.fraction_clothed + self.fraction_composited_only > 1.0 + 1e-12 {
            return Err(invalid("fraction_clothed + fraction_composited_only must not exceed 1"));
        }
        if !(0.0..=90.0).contains(&self.max_tilt_deg) {
            return Err(invalid("max_tilt_deg must lie in [0, 90]"));
        }
        self.chain.validate()?;
        self.chain.check_limits(&crate::kinematics::JointVector(self.home))?;
        Cuboid::new(self.workspace.min_corner, self.workspace.max_corner)?;
        if !(self.collision.margin >= 0.0) || !(self.collision.camera_keepout >= 0.0) {
            return Err(invalid("collision distances must be non-negative"));
        }
        self.removal.validate()?;
        self.scene.validate(&TextureRegistry::default())?;
        if self.screwdrivers.is_empty() {
            return Err(invalid("screwdriver catalog is empty"));
        }
        for (i, sd) in self.screwdrivers.iter().enumerate() {
            sd.validate()?;
            if self.screwdrivers[..i].iter().any(|o| o.id == sd.id) {
                return Err(invalid(format!("duplicate screwdriver id '{}'", sd.id)));
            }
        }
        CheckRegistry::default().select(&self.checks)?;
        self.rig.build()?;
        Ok(())
    }

    /// Rig and the common-view cuboid the tool tip is sampled from.
    pub fn rig_and_cuboid(&self) -> Result<(StereoRig, Cuboid)> {
        let rig = self.rig.build()?;
        let workspace = Cuboid::new(self.workspace.min_corner, self.workspace.max_corner)?;
        let cuboid = largest_common_cuboid(&rig, &workspace)?;
        Ok((rig, cuboid))
    }

    pub fn screwdriver(&self, id: &str) -> Option<&ScrewdriverSpec> {
        self.screwdrivers.iter().find(|s| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips_through_toml() {
        let cfg = GenerationConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(GenerationConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = GenerationConfig::from_toml_str("seed = 9\nsamples = 10\n[collision]\nmargin = 0.01\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.samples, 10);
        assert_eq!(cfg.collision.margin, 0.01);
        assert_eq!(cfg.collision.camera_keepout, CollisionConfig::default().camera_keepout);
        assert_eq!(cfg.chain, KinematicChain::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(GenerationConfig::from_toml_str("sampels = 10\n"), Err(Error::Toml(_))));
        assert!(matches!(GenerationConfig::from_toml_str("[removal]\nthresold = 0.2\n"), Err(Error::Toml(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            "samples = 0",
            "fraction_clothed = 1.5",
            "fraction_clothed = 0.7\nfraction_composited_only = 0.5",
            "checks = [\"visibility\", \"telepathy\"]",
            "screwdrivers = []",
            "[scene]\ntextures = [\"plaid\"]",
            "[workspace]\nmin_corner = [1.0, 0.0, 0.0]\nmax_corner = [0.0, 1.0, 1.0]",
        ];
        for text in bad {
            let cfg = GenerationConfig::from_toml_str(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn default_cuboid_lies_in_both_frusta() {
        let cfg = GenerationConfig::default();
        let (rig, cuboid) = cfg.rig_and_cuboid().unwrap();
        for c in cuboid.corners() {
            for h in rig.halfspaces() {
                assert!(h.slack(&c) >= -1e-9);
            }
        }
        assert!(cuboid.volume() > 0.01);
    }
}
