//! Tool-center-point calibration from contact reaches against known planes.
//!
//! Each contact gives one linear equation in the flange-frame tip offset `t`:
//! the tip `R·t + p` lies on the plane `n·x = d`, so `(nᵀR)·t = d − nᵀp`.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{rotation_between, Frame, RigidTransform};

#[derive(Debug, Clone, PartialEq)]
pub struct ContactObservation {
    /// Flange pose in the base frame at the moment of contact.
    pub flange_pose: RigidTransform,
    pub plane_normal: Vector3<f64>,
    pub plane_offset: f64,
}

impl ContactObservation {
    pub fn new(flange_pose: RigidTransform, plane_normal: Vector3<f64>, plane_offset: f64) -> Result<Self> {
        if (plane_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("plane normal must be unit length".into()));
        }
        Ok(Self {
            flange_pose,
            plane_normal,
            plane_offset,
        })
    }
}

/// Tip location in the flange frame. The tool axis is always the flange z-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolOffset {
    pub tip_offset: Vector3<f64>,
    pub axis: Vector3<f64>,
}

impl ToolOffset {
    pub fn new(tip_offset: Vector3<f64>) -> Self {
        Self {
            tip_offset,
            axis: Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub tool: ToolOffset,
    /// RMS of the plane-equation residuals (m).
    pub residual_rms: f64,
}

const RANK_TOLERANCE: f64 = 1e-9;

pub fn calibrate_tool(observations: &[ContactObservation]) -> Result<Calibration> {
    if observations.len() < 3 {
        return Err(Error::TooFewObservations {
            got: observations.len(),
            need: 3,
        });
    }
    let m = observations.len();
    let mut a = DMatrix::<f64>::zeros(m, 3);
    let mut b = DVector::<f64>::zeros(m);
    for (i, obs) in observations.iter().enumerate() {
        let n = obs.plane_normal;
        let row = obs.flange_pose.rotation().transpose() * n;
        a.row_mut(i).copy_from(&row.transpose());
        b[i] = obs.plane_offset - n.dot(obs.flange_pose.translation());
    }

    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOLERANCE * s_max.max(1.0))
        .count();
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    let solution = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let residual = &a * &solution - &b;
    let tip_offset = Vector3::new(solution[0], solution[1], solution[2]);
    Ok(Calibration {
        tool: ToolOffset::new(tip_offset),
        residual_rms: (residual.norm_squared() / m as f64).sqrt(),
    })
}

/// Tip position in the base frame for a flange pose.
pub fn tool_tip_position(flange_pose: &RigidTransform, tool: &ToolOffset) -> Vector3<f64> {
    flange_pose.transform_point(&tool.tip_offset)
}

/// Pose of the tool tip (axis along local z) in the base frame.
pub fn tool_tip_pose(flange_pose: &RigidTransform, tool: &ToolOffset) -> Result<RigidTransform> {
    flange_pose.compose(&RigidTransform::from_translation(
        tool.tip_offset,
        Frame::ToolTip,
        Frame::Flange,
    ))
}

/// A calibration plaque: `normal·x = offset`, with contacts drawn from a
/// square patch around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaque {
    pub normal: Vector3<f64>,
    pub center: Vector3<f64>,
    pub half_extent: f64,
}

impl Plaque {
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.center)
    }

    /// Table plane plus two orthogonal walls in front of a base-mounted arm.
    pub fn orthogonal_set() -> [Plaque; 3] {
        [
            Plaque {
                normal: Vector3::z(),
                center: Vector3::new(0.5, 0.0, 0.0),
                half_extent: 0.1,
            },
            Plaque {
                normal: -Vector3::x(),
                center: Vector3::new(0.8, 0.0, 0.3),
                half_extent: 0.1,
            },
            Plaque {
                normal: Vector3::y(),
                center: Vector3::new(0.5, -0.4, 0.3),
                half_extent: 0.1,
            },
        ]
    }
}

/// Simulated contact reaches: the tip with true offset `true_tip` is pressed
/// onto each plaque in turn (round robin) with the tool tilted up to
/// `max_tilt` from the plaque's inward normal. `offset_noise` is the standard
/// deviation of Gaussian noise added to the recorded plane offsets.
pub fn synthesize_contacts(
    rng: &mut impl Rng,
    true_tip: &Vector3<f64>,
    plaques: &[Plaque],
    count: usize,
    max_tilt: f64,
    offset_noise: f64,
) -> Result<Vec<ContactObservation>> {
    let noise = Normal::new(0.0, offset_noise.max(0.0))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    (0..count)
        .map(|i| {
            let plaque = &plaques[i % plaques.len()];
            // Tool axis (flange z) pushes into the plaque: along −normal.
            let approach = rotation_between(&Vector3::z(), &(-plaque.normal));
            let tilt = crate::sample::pose::tilt_rotation(rng, max_tilt);
            let rotation = approach * tilt;
            let in_plane = rotation_between(&Vector3::z(), &plaque.normal);
            let u = in_plane * Vector3::x();
            let v = in_plane * Vector3::y();
            let contact = plaque.center
                + u * rng.random_range(-plaque.half_extent..=plaque.half_extent)
                + v * rng.random_range(-plaque.half_extent..=plaque.half_extent);
            let translation = contact - rotation * true_tip;
            let flange = RigidTransform::new(rotation, translation, Frame::Flange, Frame::Base)?;
            let recorded = plaque.offset() + if offset_noise > 0.0 { noise.sample(rng) } else { 0.0 };
            ContactObservation::new(flange, plaque.normal, recorded)
        })
        .collect()
}
