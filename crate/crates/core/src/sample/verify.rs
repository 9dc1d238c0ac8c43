//! Label verification through the classical stereo pipeline: project the
//! tool tip into both cameras, optionally perturb the pixels, triangulate,
//! and compare with the stored label.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::generate::{splitmix64, SampleLabel};
use crate::calibration::tool_tip_position;
use crate::camera::{PixelPoint, Point3, StereoRig};
use crate::error::{Error, Result};
use crate::kinematics::{JointVector, KinematicChain};
use crate::calibration::ToolOffset;

/// Largest allowed distance between a label and the forward kinematics of
/// its own joint vector (m).
pub const LABEL_CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// Tolerance on every per-sample error when no noise is added (m).
pub const NOISELESS_TOLERANCE: f64 = 1e-9;

/// Monte-Carlo draws per sample for the noisy baseline.
pub const BASELINE_DRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Half-width of the uniform pixel noise.
    pub noise_px: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { noise_px: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerification {
    pub index: usize,
    /// Triangulated tip vs label (m).
    pub error_m: Option<f64>,
    pub ray_gap_m: Option<f64>,
    /// Label vs forward kinematics of the label's joints (m).
    pub label_fk_error_m: Option<f64>,
    pub flagged: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub noise_px: f64,
    pub sample_count: usize,
    pub median_error_m: f64,
    pub p95_error_m: f64,
    pub max_error_m: f64,
    /// Error statistics of the same pipeline on noisy projections of the
    /// ground truth, for `noise_px > 0`.
    pub baseline_median_m: Option<f64>,
    pub baseline_p95_m: Option<f64>,
    /// Bound on the 95th-percentile error.
    pub tolerance_m: f64,
    pub flagged: Vec<usize>,
    pub samples: Vec<SampleVerification>,
    pub pass: bool,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn perturb(p: &PixelPoint, noise: f64, rng: &mut ChaCha8Rng) -> PixelPoint {
    if noise == 0.0 {
        return *p;
    }
    PixelPoint {
        u: p.u + rng.random_range(-noise..=noise),
        v: p.v + rng.random_range(-noise..=noise),
        ..*p
    }
}

/// Projects `truth` into both cameras, adds noise and triangulates.
pub fn noisy_triangulation(rig: &StereoRig, truth: &Vector3<f64>, noise: f64, rng: &mut ChaCha8Rng) -> Result<(Vector3<f64>, f64)> {
    let p = Point3::base(*truth);
    let (l, r) = (rig.left.project(&p)?, rig.right.project(&p)?);
    if !(l.in_bounds && r.in_bounds) {
        return Err(Error::InvalidConfig("tip projects outside an image".into()));
    }
    let t = rig.triangulate(&perturb(&l, noise, rng), &perturb(&r, noise, rng))?;
    Ok((t.point.coords, t.ray_gap))
}

struct Context<'a> {
    rig: &'a StereoRig,
    chain: &'a KinematicChain,
    tool: &'a dyn Fn(&str) -> Option<ToolOffset>,
    options: VerifyOptions,
}

fn truth_of(ctx: &Context<'_>, label: &SampleLabel) -> Result<Vector3<f64>> {
    let tool = (ctx.tool)(&label.screwdriver_id)
        .ok_or_else(|| Error::UnknownName {
            kind: "screwdriver",
            name: label.screwdriver_id.clone(),
        })?;
    let flange = ctx.chain.forward_kinematics(&JointVector(label.joints_rad))?;
    Ok(tool_tip_position(&flange, &tool))
}

fn verify_label(ctx: &Context<'_>, index: usize, label: Result<SampleLabel>) -> SampleVerification {
    let failed = |message: String| SampleVerification {
        index,
        error_m: None,
        ray_gap_m: None,
        label_fk_error_m: None,
        flagged: true,
        message: Some(message),
    };
    let label = match label {
        Ok(l) => l,
        Err(e) => return failed(format!("unreadable: {e}")),
    };
    let truth = match truth_of(ctx, &label) {
        Ok(t) => t,
        Err(e) => return failed(e.to_string()),
    };
    let stored = Vector3::from(label.position_base_m);
    let fk_error = (truth - stored).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(ctx.options.seed ^ index as u64));
    match noisy_triangulation(ctx.rig, &truth, ctx.options.noise_px, &mut rng) {
        Ok((point, gap)) => {
            let error = (point - stored).norm();
            let mut message = None;
            if fk_error > LABEL_CONSISTENCY_TOLERANCE {
                message = Some(format!("label is {fk_error:.3e} m from the forward kinematics of its joints"));
            } else if ctx.options.noise_px == 0.0 && !(error < NOISELESS_TOLERANCE) {
                message = Some(format!("noiseless error {error:.3e} m"));
            }
            SampleVerification {
                index,
                error_m: Some(error),
                ray_gap_m: Some(gap),
                label_fk_error_m: Some(fk_error),
                flagged: message.is_some(),
                message,
            }
        }
        Err(e) => SampleVerification {
            label_fk_error_m: Some(fk_error),
            ..failed(e.to_string())
        },
    }
}

/// Pooled errors of the pipeline on noisy projections of the ground truth.
fn baseline(ctx: &Context<'_>, truths: &[Vector3<f64>]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(!ctx.options.seed));
    let mut errors = Vec::with_capacity(truths.len() * BASELINE_DRAWS);
    for t in truths {
        for _ in 0..BASELINE_DRAWS {
            if let Ok((p, _)) = noisy_triangulation(ctx.rig, t, ctx.options.noise_px, &mut rng) {
                errors.push((p - t).norm());
            }
        }
    }
    errors
}

fn report(ctx: &Context<'_>, labels: Vec<Result<SampleLabel>>) -> VerifyReport {
    let truths: Vec<Vector3<f64>> = labels
        .iter()
        .filter_map(|l| l.as_ref().ok().and_then(|l| truth_of(ctx, l).ok()))
        .collect();
    let samples: Vec<SampleVerification> = labels.into_iter().enumerate().map(|(i, l)| verify_label(ctx, i, l)).collect();
    let errors: Vec<f64> = samples.iter().filter_map(|s| s.error_m).collect();
    let flagged: Vec<usize> = samples.iter().filter(|s| s.flagged).map(|s| s.index).collect();
    let median = quantile(&errors, 0.5);
    let p95 = quantile(&errors, 0.95);
    let (baseline_median_m, baseline_p95_m, tolerance_m) = if ctx.options.noise_px > 0.0 {
        let b = baseline(ctx, &truths);
        let (bm, bp) = (quantile(&b, 0.5), quantile(&b, 0.95));
        (Some(bm), Some(bp), 2.0 * bp)
    } else {
        (None, None, NOISELESS_TOLERANCE)
    };
    let median_ok = baseline_median_m.is_none_or(|bm| median <= 2.0 * bm);
    let pass = !samples.is_empty() && flagged.is_empty() && p95 < tolerance_m && median_ok;
    VerifyReport {
        noise_px: ctx.options.noise_px,
        sample_count: samples.len(),
        median_error_m: median,
        p95_error_m: p95,
        max_error_m: errors.iter().copied().fold(f64::NAN, f64::max),
        baseline_median_m,
        baseline_p95_m,
        tolerance_m,
        flagged,
        samples,
        pass,
    }
}

pub fn verify_labels(rig: &StereoRig, chain: &KinematicChain, tool: &dyn Fn(&str) -> Option<ToolOffset>, labels: Vec<Result<SampleLabel>>, options: VerifyOptions) -> VerifyReport {
    let ctx = Context { rig, chain, tool, options };
    report(&ctx, labels)
}

pub fn verify_dataset(dataset: &Dataset, options: VerifyOptions) -> Result<VerifyReport> {
    if !(options.noise_px >= 0.0 && options.noise_px.is_finite()) {
        return Err(Error::InvalidConfig("noise must be a non-negative number of pixels".into()));
    }
    let m = &dataset.manifest;
    let labels = (0..dataset.len()).map(|i| dataset.label(i)).collect();
    let tool = |id: &str| m.tool(id).copied();
    Ok(verify_labels(&m.rig, &m.config.chain, &tool, labels, options))
}

impl VerifyReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} samples, noise ±{} px: median {:.3e} m, p95 {:.3e} m, max {:.3e} m, tolerance {:.3e} m",
            self.sample_count, self.noise_px, self.median_error_m, self.p95_error_m, self.max_error_m, self.tolerance_m
        );
        if let (Some(bm), Some(bp)) = (self.baseline_median_m, self.baseline_p95_m) {
            s += &format!("\nbaseline: median {bm:.3e} m, p95 {bp:.3e} m");
        }
        for v in self.samples.iter().filter(|v| v.flagged) {
            s += &format!("\nsample {}: {}", v.index, v.message.as_deref().unwrap_or("flagged"));
        }
        s += if self.pass { "\nPASS" } else { "\nFAIL" };
        s
    }
}
