//! Per-attempt sampling pipeline and the parallel, deterministic driver.

use std::fmt;

use image::RgbImage;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{Capsule, CheckInput, CheckRegistry, Obstacle, RejectionReason};
use super::config::GenerationConfig;
use super::pose::sample_tool_pose;
use crate::calibration::{tool_tip_pose, ToolOffset};
use crate::camera::StereoRig;
use crate::cuboid::Cuboid;
use crate::error::{Error, Result};
use crate::kinematics::JointVector;
use crate::removal::{composite, removal_mask};
use crate::render::geometry::{robot_geometry, screwdriver_endpoints, screwdriver_primitives, ScrewdriverSpec};
use crate::render::randomize::{randomize_scene, RenderMode, SceneDraw};
use crate::render::raycast::{trace, IdMap, Layers, Trace};
use crate::render::scene::Primitive;
use crate::render::texture::TextureRegistry;
use crate::se3::RigidTransform;

/// Ground truth stored with every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleLabel {
    pub position_base_m: [f64; 3],
    pub orientation_quat_wxyz: [f64; 4],
    pub joints_rad: [f64; 7],
    pub screwdriver_id: String,
    pub scene_seed: u64,
    pub mode: RenderMode,
    pub composited: bool,
}

/// The images captured by one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImages {
    pub rt: RgbImage,
    pub ro: RgbImage,
    pub bg_rt: RgbImage,
    pub bg_ro: RgbImage,
    pub tool_only: RgbImage,
    pub id_rt: IdMap,
    pub id_ro: IdMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub label: SampleLabel,
    /// Left camera first.
    pub cameras: [CameraImages; 2],
}

#[derive(Debug, Clone)]
pub enum Attempt {
    Accepted(Box<SampleRecord>),
    Rejected(RejectionReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectionStats {
    pub attempts: u64,
    pub accepted: u64,
    pub unreachable: u64,
    pub out_of_view: u64,
    pub occluded: u64,
    pub collision: u64,
    pub mask_overlap: u64,
}

impl RejectionStats {
    pub fn record(&mut self, outcome: Option<RejectionReason>) {
        self.attempts += 1;
        match outcome {
            None => self.accepted += 1,
            Some(r) => *self.counter(r) += 1,
        }
    }

    fn counter(&mut self, reason: RejectionReason) -> &mut u64 {
        match reason {
            RejectionReason::Unreachable => &mut self.unreachable,
            RejectionReason::OutOfView => &mut self.out_of_view,
            RejectionReason::Occluded => &mut self.occluded,
            RejectionReason::Collision => &mut self.collision,
            RejectionReason::MaskOverlap => &mut self.mask_overlap,
        }
    }

    pub fn count(&self, reason: RejectionReason) -> u64 {
        let mut copy = *self;
        *copy.counter(reason)
    }

    pub fn rejected(&self) -> u64 {
        RejectionReason::ALL.iter().map(|r| self.count(*r)).sum()
    }

    /// `accepted + Σ rejections = attempts`.
    pub fn is_consistent(&self) -> bool {
        self.accepted + self.rejected() == self.attempts
    }
}

impl fmt::Display for RejectionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} attempts, {} accepted", self.attempts, self.accepted)?;
        for r in RejectionReason::ALL {
            write!(f, ", {} {}", self.count(r), r)?;
        }
        Ok(())
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the RNG stream for one attempt.
pub fn attempt_seed(master: u64, attempt: u64) -> u64 {
    splitmix64(splitmix64(master) ^ attempt)
}

/// Largest number of attempts per requested sample.
pub const ATTEMPTS_PER_SAMPLE: u64 = 50;

/// Geometry of one candidate after IK.
struct Placement {
    q: JointVector,
    tip_pose: RigidTransform,
    /// Links as rendered (possibly clothed).
    robot: Vec<Primitive>,
    links: Vec<Capsule>,
    tool: Vec<Primitive>,
    axis: (Vector3<f64>, Vector3<f64>),
}

/// Everything drawn from an attempt's RNG stream before IK.
struct Draw {
    mode: RenderMode,
    composited: bool,
    scene: SceneDraw,
}

pub struct Generator {
    config: GenerationConfig,
    rig: StereoRig,
    cuboid: Cuboid,
    textures: TextureRegistry,
    checks: CheckRegistry,
}

impl Generator {
    pub fn new(config: GenerationConfig) -> Result<Self> {
        config.validate()?;
        let (rig, cuboid) = config.rig_and_cuboid()?;
        Ok(Generator {
            config,
            rig,
            cuboid,
            textures: TextureRegistry::default(),
            checks: CheckRegistry::default(),
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    pub fn rig(&self) -> &StereoRig {
        &self.rig
    }

    pub fn cuboid(&self) -> &Cuboid {
        &self.cuboid
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Draw> {
        let cfg = &self.config;
        let u: f64 = rng.random();
        let (mode, composited) = if u < cfg.fraction_clothed {
            (RenderMode::RobotClothed, false)
        } else {
            (RenderMode::RobotVisible, u < cfg.fraction_clothed + cfg.fraction_composited_only)
        };
        let scene = randomize_scene(rng, &cfg.scene, &self.textures, &cfg.screwdrivers, mode)?;
        Ok(Draw { mode, composited, scene })
    }

    fn place(&self, draw: &Draw, spec: &ScrewdriverSpec, q: JointVector) -> Result<Placement> {
        let chain = &self.config.chain;
        let links = robot_geometry(chain, &q)?;
        let capsules = links.iter().filter_map(Capsule::from_primitive).collect();
        let tip_pose = tool_tip_pose(&chain.forward_kinematics(&q)?, &spec.nominal_offset())?;
        Ok(Placement {
            q,
            tool: screwdriver_primitives(spec, &tip_pose)?,
            axis: screwdriver_endpoints(spec, &tip_pose),
            tip_pose,
            robot: draw.scene.dress(links),
            links: capsules,
        })
    }

    fn obstacles(&self, draw: &Draw) -> Vec<Obstacle> {
        let keepout = self.config.collision.camera_keepout;
        [&self.rig.left, &self.rig.right]
            .iter()
            .map(|c| Obstacle {
                center: c.center(),
                radius: keepout,
            })
            .chain(draw.scene.environment.iter().skip(1).filter_map(|p| {
                p.bounding_sphere().map(|(center, radius)| Obstacle { center, radius })
            }))
            .collect()
    }

    /// Runs the configured checks; returns the traces when all pass.
    fn evaluate(&self, draw: &Draw, spec: &ScrewdriverSpec, placement: &Placement, checks: &[String]) -> Result<std::result::Result<[Trace; 2], RejectionReason>> {
        let tip = placement.axis.0;
        if !self.cuboid.contains(&tip) {
            return Ok(Err(RejectionReason::OutOfView));
        }
        let obstacles = self.obstacles(draw);
        let mut input = CheckInput {
            rig: &self.rig,
            robot: &placement.robot,
            links: &placement.links,
            tool: &placement.tool,
            tool_axis: placement.axis,
            tool_radius: spec.handle_radius.max(spec.shaft_radius),
            obstacles: &obstacles,
            margin: self.config.collision.margin,
            traces: None,
            robot_offset: draw.scene.environment.len(),
            mask_radius: self.config.removal.influence_radius(),
        };
        let checks = self.checks.select(checks)?;
        let (image_checks, geometric): (Vec<_>, Vec<_>) = checks.into_iter().partition(|c| c.needs_render());
        if let Some(c) = geometric.iter().find(|c| !c.check(&input)) {
            return Ok(Err(c.reason()));
        }
        let traces = self.trace(draw, placement)?;
        input.traces = Some(&traces);
        if let Some(c) = image_checks.iter().find(|c| !c.check(&input)) {
            return Ok(Err(c.reason()));
        }
        Ok(Ok(traces))
    }

    fn trace(&self, draw: &Draw, placement: &Placement) -> Result<[Trace; 2]> {
        let scene = draw.scene.assemble_dressed(placement.robot.clone(), placement.tool.clone())?;
        Ok([trace(&scene, &self.rig.left), trace(&scene, &self.rig.right)])
    }

    fn capture(&self, draw: &Draw, trace: &Trace) -> Result<CameraImages> {
        let s = &draw.scene;
        let rt = trace.shade(&s.lighting, Layers::ALL);
        let ro = trace.shade(&s.lighting, Layers::ROBOT_ONLY);
        let bg_rt = trace.shade(&s.background_rt_lighting, Layers::BACKGROUND);
        let bg_ro = trace.shade(&s.lighting, Layers::BACKGROUND);
        let w = removal_mask(&rt, &ro, &bg_ro, &self.config.removal)?;
        let tool_only = composite(&rt, &bg_rt, &w)?;
        Ok(CameraImages {
            id_rt: trace.id_map(Layers::ALL),
            id_ro: trace.id_map(Layers::ROBOT_ONLY),
            rt,
            ro,
            bg_rt,
            bg_ro,
            tool_only,
        })
    }

    /// IK from the home configuration, then from random restarts.
    fn solve(&self, rng: &mut ChaCha8Rng, tip_pose: &RigidTransform, offset: &ToolOffset) -> Result<Option<JointVector>> {
        let chain = &self.config.chain;
        let to_tip = RigidTransform::from_translation(offset.tip_offset, crate::se3::Frame::ToolTip, crate::se3::Frame::Flange);
        let flange = tip_pose.compose(&to_tip.inverse())?;
        let restarts: Vec<JointVector> = (0..self.config.ik_restarts)
            .map(|_| JointVector(std::array::from_fn(|i| {
                let l = chain.limits[i];
                rng.random_range(l.lower..l.upper)
            })))
            .collect();
        let seeds = std::iter::once(JointVector(self.config.home)).chain(restarts);
        for seed in seeds {
            match chain.inverse_kinematics(&flange, &seed, &self.config.ik) {
                Ok(q) => return Ok(Some(q)),
                Err(Error::NoConvergence { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    /// One full attempt: draw, IK, checks and, on success, the images.
    pub fn attempt(&self, attempt: u64) -> Result<Attempt> {
        let seed = attempt_seed(self.config.seed, attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = self.draw(&mut rng)?;
        let spec = &self.config.screwdrivers[draw.scene.screwdriver];
        let target = sample_tool_pose(&mut rng, &self.cuboid, self.config.max_tilt_deg.to_radians());
        let Some(q) = self.solve(&mut rng, &target, &spec.nominal_offset())? else {
            return Ok(Attempt::Rejected(RejectionReason::Unreachable));
        };
        let placement = self.place(&draw, spec, q)?;
        let traces = match self.evaluate(&draw, spec, &placement, &self.config.checks)? {
            Ok(t) => t,
            Err(reason) => return Ok(Attempt::Rejected(reason)),
        };
        let tip = *placement.tip_pose.translation();
        let label = SampleLabel {
            position_base_m: [tip.x, tip.y, tip.z],
            orientation_quat_wxyz: placement.tip_pose.quaternion_wxyz(),
            joints_rad: placement.q.0,
            screwdriver_id: spec.id.clone(),
            scene_seed: seed,
            mode: draw.mode,
            composited: draw.composited,
        };
        let cameras = [self.capture(&draw, &traces[0])?, self.capture(&draw, &traces[1])?];
        Ok(Attempt::Accepted(Box::new(SampleRecord { label, cameras })))
    }

    /// Rebuilds a stored sample from its label and reruns every check.
    /// Returns the first failed check, or a description of any mismatch
    /// between the label and what its seed reproduces.
    pub fn recheck(&self, label: &SampleLabel) -> Result<std::result::Result<(), String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(label.scene_seed);
        let draw = self.draw(&mut rng)?;
        let spec = &self.config.screwdrivers[draw.scene.screwdriver];
        if spec.id != label.screwdriver_id || draw.mode != label.mode || draw.composited != label.composited {
            return Ok(Err("label does not match its scene seed".into()));
        }
        let q = JointVector(label.joints_rad);
        if self.config.chain.check_limits(&q).is_err() {
            return Ok(Err("joints outside limits".into()));
        }
        let placement = self.place(&draw, spec, q)?;
        let tip = placement.tip_pose.translation();
        if (tip - Vector3::from(label.position_base_m)).norm() > 1e-9 {
            return Ok(Err("position disagrees with forward kinematics".into()));
        }
        let tilt = super::pose::tilt_from_vertical(&placement.tip_pose);
        if tilt > self.config.max_tilt_deg.to_radians() + 1e-9 {
            return Ok(Err(format!("tilt {tilt} rad above the configured maximum")));
        }
        let all: Vec<String> = self.checks.names().map(String::from).collect();
        let outcome = self.evaluate(&draw, spec, &placement, &all)?;
        Ok(outcome.map(|_| ()).map_err(|r| format!("fails {r}")))
    }

    /// Runs attempts in index order until `samples` are accepted, handing
    /// each accepted record to `sink` with its output index. The result
    /// does not depend on `workers`.
    pub fn generate<F>(&self, workers: usize, sink: F) -> Result<RejectionStats>
    where
        F: Fn(usize, &SampleRecord) -> Result<()> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start workers: {e}")))?;
        pool.install(|| self.generate_in_pool(workers.max(1), &sink))
    }

    fn generate_in_pool<F>(&self, workers: usize, sink: &F) -> Result<RejectionStats>
    where
        F: Fn(usize, &SampleRecord) -> Result<()> + Sync,
    {
        let wanted = self.config.samples;
        let cap = ATTEMPTS_PER_SAMPLE * wanted as u64;
        let batch = 4 * workers as u64;
        let mut stats = RejectionStats::default();
        let mut next = 0u64;
        while (stats.accepted as usize) < wanted && next < cap {
            let end = (next + batch).min(cap);
            let outcomes: Vec<Attempt> = (next..end).into_par_iter().map(|a| self.attempt(a)).collect::<Result<_>>()?;
            next = end;
            let mut accepted = Vec::new();
            for outcome in outcomes {
                if stats.accepted as usize == wanted {
                    break;
                }
                match outcome {
                    Attempt::Accepted(record) => {
                        accepted.push((stats.accepted as usize, record));
                        stats.record(None);
                    }
                    Attempt::Rejected(r) => stats.record(Some(r)),
                }
            }
            accepted.par_iter().try_for_each(|(i, r)| sink(*i, r))?;
        }
        if (stats.accepted as usize) < wanted {
            return Err(Error::AttemptCapReached {
                attempts: stats.attempts,
                accepted: stats.accepted as usize,
                requested: wanted,
                stats: Box::new(stats),
            });
        }
        Ok(stats)
    }
}
