//! Block-matching disparity for rectified pairs, used as a rendering sanity
//! check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::StereoRig;
use crate::error::{Error, Result};
use crate::imaging::{ensure_same_size, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockMatchParams {
    /// Half-size of the square SAD window.
    pub block_radius: u32,
    pub max_disparity: u32,
    /// A match is kept only if `best < ratio · second_best`, where
    /// candidates within one pixel of the best are not counted as second.
    pub uniqueness_ratio: f64,
}

impl Default for BlockMatchParams {
    fn default() -> Self {
        BlockMatchParams {
            block_radius: 3,
            max_disparity: 64,
            uniqueness_ratio: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: u32,
    height: u32,
    data: Vec<Option<u32>>,
}

impl DisparityMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// `None` where the match was rejected or the window left the image.
    pub fn get(&self, x: u32, y: u32) -> Option<u32> {
        self.data[(y * self.width + x) as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_some()).count()
    }

    pub fn values(&self) -> &[Option<u32>] {
        &self.data
    }
}

/// Left-referenced disparity: the left pixel `x` matches right pixel `x − d`.
pub fn block_match_disparity(left: &GrayImage, right: &GrayImage, params: &BlockMatchParams) -> Result<DisparityMap> {
    ensure_same_size(left.dimensions(), right.dimensions())?;
    let (w, h) = (left.width() as i64, left.height() as i64);
    let r = params.block_radius as i64;

    let sad = |x: i64, y: i64, d: i64| -> f64 {
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (lx, ly) = ((x + dx) as u32, (y + dy) as u32);
                acc += (left.get(lx, ly) - right.get(lx - d as u32, ly)).abs();
            }
        }
        acc
    };

    let rows: Vec<Vec<Option<u32>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if y < r || y >= h - r || x < r || x >= w - r {
                        return None;
                    }
                    // The right window must also stay inside the image.
                    let max_d = (params.max_disparity as i64).min(x - r);
                    let costs: Vec<f64> = (0..=max_d).map(|d| sad(x, y, d)).collect();
                    let (best_d, best) = costs
                        .iter()
                        .enumerate()
                        .fold((0usize, f64::INFINITY), |acc, (d, c)| if *c < acc.1 { (d, *c) } else { acc });
                    let second = costs
                        .iter()
                        .enumerate()
                        .filter(|(d, _)| d.abs_diff(best_d) > 1)
                        .map(|(_, c)| *c)
                        .fold(f64::INFINITY, f64::min);
                    (second.is_finite() && best < params.uniqueness_ratio * second).then_some(best_d as u32)
                })
                .collect()
        })
        .collect();

    Ok(DisparityMap {
        width: left.width(),
        height: left.height(),
        data: rows.into_iter().flatten().collect(),
    })
}

/// `Z = fx · B / d` for a rectified rig; zero disparity has no finite depth.
pub fn depth_from_disparity(map: &DisparityMap, rig: &StereoRig) -> Result<Vec<Option<f64>>> {
    let baseline = rig.rectified_baseline()?;
    let fx = rig.left.intrinsics.fx;
    if map.width != rig.left.intrinsics.width || map.height != rig.left.intrinsics.height {
        return Err(Error::SizeMismatch {
            left: (map.width, map.height),
            right: (rig.left.intrinsics.width, rig.left.intrinsics.height),
        });
    }
    Ok(map
        .data
        .iter()
        .map(|d| d.filter(|d| *d > 0).map(|d| fx * baseline / d as f64))
        .collect())
}
