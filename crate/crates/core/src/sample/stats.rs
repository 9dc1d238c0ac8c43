//! Dataset diversity statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{UnitQuaternion, Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::generate::{RejectionStats, SampleLabel};
use crate::cuboid::Cuboid;
use crate::error::Result;
use crate::render::randomize::RenderMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    /// Values outside `[lo, hi]` go to the nearest end bin.
    pub fn add(&mut self, v: f64) {
        let n = self.counts.len();
        let f = if self.hi > self.lo { (v - self.lo) / (self.hi - self.lo) } else { 0.0 };
        let bin = ((f * n as f64).floor().max(0.0) as usize).min(n - 1);
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_text(&self, title: &str) -> String {
        let mut out = format!("{title}\n");
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let start = self.lo + width * i as f64;
            let bar = "#".repeat((40 * c).div_ceil(peak) as usize);
            let _ = writeln!(out, "  [{:>8.3}, {:>8.3}) {:>6} {}", start, start + width, c, bar);
        }
        out
    }
}

pub const VOXELS_PER_AXIS: usize = 10;
pub const DIVERSITY_WINDOW: usize = 1000;
pub const MIN_VOXEL_COVERAGE: f64 = 0.6;

/// Fraction of the `10 × 10 × 10` voxels of `cuboid` holding at least one
/// of `points`.
pub fn voxel_coverage(cuboid: &Cuboid, points: impl IntoIterator<Item = Vector3<f64>>) -> f64 {
    let n = VOXELS_PER_AXIS;
    let ext = cuboid.extents();
    let occupied: BTreeSet<[usize; 3]> = points
        .into_iter()
        .map(|p| std::array::from_fn(|a| ((((p[a] - cuboid.min_corner[a]) / ext[a]) * n as f64).floor().max(0.0) as usize).min(n - 1)))
        .collect();
    occupied.len() as f64 / (n * n * n) as f64
}

/// Diversity floor evaluated on each consecutive block of 1000 samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityFloor {
    /// False when the dataset holds fewer than 1000 samples.
    pub applicable: bool,
    pub block_coverages: Vec<f64>,
    pub block_screwdrivers: Vec<usize>,
    pub block_modes: Vec<usize>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sample_count: usize,
    /// Tip position per base axis over the cuboid extent.
    pub position_histograms: [Histogram; 3],
    /// Tool tilt from vertical (degrees).
    pub tilt_histogram: Histogram,
    pub mode_counts: BTreeMap<RenderMode, u64>,
    pub composited_count: u64,
    pub screwdriver_counts: BTreeMap<String, u64>,
    pub voxel_coverage: f64,
    pub rejection_stats: RejectionStats,
    pub diversity: DiversityFloor,
}

fn tilt_deg(label: &SampleLabel) -> f64 {
    let [w, x, y, z] = label.orientation_quat_wxyz;
    let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
    let axis = q * Vector3::z();
    (-axis.z).clamp(-1.0, 1.0).acos().to_degrees()
}

fn diversity(labels: &[SampleLabel], cuboid: &Cuboid, both_modes_expected: bool) -> DiversityFloor {
    let blocks: Vec<&[SampleLabel]> = labels.chunks_exact(DIVERSITY_WINDOW).collect();
    let block_coverages: Vec<f64> = blocks
        .iter()
        .map(|b| voxel_coverage(cuboid, b.iter().map(|l| Vector3::from(l.position_base_m))))
        .collect();
    let block_screwdrivers: Vec<usize> = blocks
        .iter()
        .map(|b| b.iter().map(|l| &l.screwdriver_id).collect::<BTreeSet<_>>().len())
        .collect();
    let block_modes: Vec<usize> = blocks.iter().map(|b| b.iter().map(|l| l.mode).collect::<BTreeSet<_>>().len()).collect();
    let min_modes = if both_modes_expected { 2 } else { 1 };
    let pass = block_coverages.iter().all(|c| *c >= MIN_VOXEL_COVERAGE)
        && block_screwdrivers.iter().all(|n| *n >= 2)
        && block_modes.iter().all(|n| *n >= min_modes);
    DiversityFloor {
        applicable: !blocks.is_empty(),
        block_coverages,
        block_screwdrivers,
        block_modes,
        pass,
    }
}

pub fn compute_stats(dataset: &Dataset) -> Result<StatsReport> {
    let labels = (0..dataset.len()).map(|i| dataset.label(i)).collect::<Result<Vec<_>>>()?;
    let m = &dataset.manifest;
    Ok(stats_from_labels(&labels, &m.cuboid, m.config.max_tilt_deg, m.config.fraction_clothed, m.rejection_stats))
}

pub fn stats_from_labels(labels: &[SampleLabel], cuboid: &Cuboid, max_tilt_deg: f64, fraction_clothed: f64, rejection_stats: RejectionStats) -> StatsReport {
    let mut position_histograms: [Histogram; 3] =
        std::array::from_fn(|a| Histogram::new(cuboid.min_corner[a], cuboid.max_corner[a], VOXELS_PER_AXIS));
    let mut tilt_histogram = Histogram::new(0.0, max_tilt_deg.max(1e-9), 10);
    let mut mode_counts = BTreeMap::new();
    let mut screwdriver_counts = BTreeMap::new();
    let mut composited_count = 0;
    for l in labels {
        for (h, v) in position_histograms.iter_mut().zip(l.position_base_m) {
            h.add(v);
        }
        tilt_histogram.add(tilt_deg(l));
        *mode_counts.entry(l.mode).or_insert(0) += 1;
        *screwdriver_counts.entry(l.screwdriver_id.clone()).or_insert(0) += 1;
        composited_count += u64::from(l.composited);
    }
    StatsReport {
        sample_count: labels.len(),
        position_histograms,
        tilt_histogram,
        mode_counts,
        composited_count,
        screwdriver_counts,
        voxel_coverage: voxel_coverage(cuboid, labels.iter().map(|l| Vector3::from(l.position_base_m))),
        rejection_stats,
        diversity: diversity(labels, cuboid, fraction_clothed > 0.0 && fraction_clothed < 1.0),
    }
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("samples: {}\n", self.sample_count);
        for (h, axis) in self.position_histograms.iter().zip(["x", "y", "z"]) {
            out += &h.to_text(&format!("tip {axis} (m)"));
        }
        out += &self.tilt_histogram.to_text("tilt from vertical (deg)");
        for (mode, n) in &self.mode_counts {
            let _ = writeln!(out, "mode {}: {n}", serde_json::to_string(mode).unwrap_or_default().trim_matches('"'));
        }
        let _ = writeln!(out, "composited: {}", self.composited_count);
        for (id, n) in &self.screwdriver_counts {
            let _ = writeln!(out, "screwdriver {id}: {n}");
        }
        let _ = writeln!(out, "voxel coverage: {:.1}%", 100.0 * self.voxel_coverage);
        let _ = writeln!(out, "rejections: {}", self.rejection_stats);
        if self.diversity.applicable {
            let _ = writeln!(
                out,
                "diversity floor per {DIVERSITY_WINDOW} samples: {} (coverages {:?})",
                if self.diversity.pass { "ok" } else { "FAILED" },
                self.diversity.block_coverages
            );
        } else {
            let _ = writeln!(out, "diversity floor: not applicable below {DIVERSITY_WINDOW} samples");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cuboid() -> Cuboid {
        Cuboid::new(Vector3::zeros(), Vector3::new(1.0, 2.0, 0.5)).unwrap()
    }

    fn label(p: [f64; 3], sd: &str, mode: RenderMode) -> SampleLabel {
        SampleLabel {
            position_base_m: p,
            orientation_quat_wxyz: [0.0, 1.0, 0.0, 0.0],
            joints_rad: [0.0; 7],
            screwdriver_id: sd.into(),
            scene_seed: 0,
            mode,
            composited: false,
        }
    }

    #[test]
    fn single_sample_fills_one_bin_everywhere() {
        let r = stats_from_labels(&[label([0.3, 1.1, 0.2], "a", RenderMode::RobotVisible)], &cuboid(), 30.0, 0.25, RejectionStats::default());
        for h in r.position_histograms.iter().chain([&r.tilt_histogram]) {
            assert_eq!(h.total(), 1);
            assert_eq!(h.counts.iter().filter(|c| **c > 0).count(), 1);
        }
        // Straight down.
        assert_eq!(r.tilt_histogram.counts[0], 1);
        assert_eq!(r.mode_counts.values().sum::<u64>(), 1);
        assert!((r.voxel_coverage - 0.001).abs() < 1e-15);
        assert!(!r.diversity.applicable);
    }

    #[test]
    fn coverage_matches_expected_occupancy() {
        // Uniform points: occupied fraction ≈ 1 − (1 − 1/1000)^n.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cuboid();
        let n = 1000;
        let mut trials = Vec::new();
        for _ in 0..20 {
            let pts: Vec<Vector3<f64>> = (0..n).map(|_| Vector3::from_fn(|a, _| rng.random_range(0.0..c.max_corner[a]))).collect();
            trials.push(voxel_coverage(&c, pts));
        }
        let mean = trials.iter().sum::<f64>() / trials.len() as f64;
        let expected = 1.0 - (1.0 - 1e-3f64).powi(n);
        assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
        // Every point in one corner voxel.
        assert_eq!(voxel_coverage(&c, vec![Vector3::zeros(); 50]), 0.001);
    }

    #[test]
    fn counts_add_up_and_diversity_floor_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = cuboid();
        let labels: Vec<SampleLabel> = (0..2000)
            .map(|i| {
                let p = std::array::from_fn(|a| rng.random_range(0.0..c.max_corner[a]));
                let mode = if i % 4 == 0 { RenderMode::RobotClothed } else { RenderMode::RobotVisible };
                label(p, ["a", "b"][i % 2], mode)
            })
            .collect();
        let r = stats_from_labels(&labels, &c, 30.0, 0.25, RejectionStats::default());
        assert_eq!(r.mode_counts.values().sum::<u64>(), 2000);
        assert_eq!(r.screwdriver_counts.values().sum::<u64>(), 2000);
        assert!(r.diversity.applicable && r.diversity.pass, "{:?}", r.diversity);
        assert_eq!(r.diversity.block_coverages.len(), 2);

        let single: Vec<SampleLabel> = labels.iter().map(|l| SampleLabel { screwdriver_id: "a".into(), ..l.clone() }).collect();
        assert!(!stats_from_labels(&single, &c, 30.0, 0.25, RejectionStats::default()).diversity.pass);
        let clustered: Vec<SampleLabel> = labels.iter().map(|l| SampleLabel { position_base_m: [0.01, 0.01, 0.01], ..l.clone() }).collect();
        assert!(!stats_from_labels(&clustered, &c, 30.0, 0.25, RejectionStats::default()).diversity.pass);
    }
}
