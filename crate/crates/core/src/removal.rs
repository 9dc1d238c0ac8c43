//! Computational robot removal from the four-image capture.
//!
//! The robot-only image and its background give a soft robot mask `W`
//! (difference → threshold → opening → dilation → Gaussian blur), and the
//! tool-only image is `(1 − W)·(robot + tool) + W·(background for R+T)`.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ensure_same_size, BinaryMask, GrayImage, SoftMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemovalParams {
    /// Difference threshold τ on the normalized RGB distance.
    pub threshold: f64,
    /// Opening radius r₁ (px).
    pub opening_radius: u32,
    /// Post-opening dilation radius r₂ (px).
    pub dilation_radius: u32,
    /// Gaussian blur σ (px).
    pub blur_sigma: f64,
    /// Zero `W` wherever the robot+tool image differs from the robot-only
    /// image, so tool pixels are never blended away.
    pub protect_tool: bool,
    pub tool_threshold: f64,
}

impl Default for RemovalParams {
    fn default() -> Self {
        RemovalParams {
            threshold: 0.02,
            opening_radius: 2,
            dilation_radius: 2,
            blur_sigma: 1.5,
            protect_tool: true,
            tool_threshold: 0.01,
        }
    }
}

impl RemovalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig("removal threshold must be in (0, 1)".into()));
        }
        if !(self.tool_threshold >= 0.0 && self.tool_threshold < 1.0) {
            return Err(Error::InvalidConfig("tool threshold must be in [0, 1)".into()));
        }
        if !(self.blur_sigma > 0.0) {
            return Err(Error::InvalidConfig("blur sigma must be positive".into()));
        }
        Ok(())
    }

    /// Distance (px) beyond which a robot pixel cannot influence `W`.
    pub fn influence_radius(&self) -> u32 {
        self.opening_radius + self.dilation_radius + (3.0 * self.blur_sigma).ceil() as u32
    }
}

/// Per-pixel RGB Euclidean distance scaled to `[0, 1]` by `√3`.
pub fn pixel_diff(a: &RgbImage, b: &RgbImage) -> Result<GrayImage> {
    ensure_same_size(a.dimensions(), b.dimensions())?;
    Ok(GrayImage::from_fn(a.width(), a.height(), |x, y| {
        let (pa, pb) = (a.get_pixel(x, y).0, b.get_pixel(x, y).0);
        let sq: f64 = (0..3)
            .map(|c| {
                let d = (pa[c] as f64 - pb[c] as f64) / 255.0;
                d * d
            })
            .sum();
        (sq / 3.0).sqrt()
    }))
}

pub fn threshold(g: &GrayImage, tau: f64) -> BinaryMask {
    BinaryMask::from_fn(g.width(), g.height(), |x, y| g.get(x, y) > tau)
}

fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Neighbours falling outside the image are ignored, which makes erosion and
/// dilation an adjoint pair on the finite grid (so opening is idempotent).
fn morph(m: &BinaryMask, radius: u32, dilate: bool) -> BinaryMask {
    if radius == 0 {
        return m.clone();
    }
    let offsets = disk_offsets(radius);
    let (w, h) = (m.width() as i64, m.height() as i64);
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        let mut in_bounds = offsets.iter().filter_map(|(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| m.get(nx as u32, ny as u32))
        });
        if dilate {
            in_bounds.any(|v| v)
        } else {
            in_bounds.all(|v| v)
        }
    })
}

pub fn erode(m: &BinaryMask, radius: u32) -> BinaryMask {
    morph(m, radius, false)
}

/// Minkowski dilation by a Euclidean disk.
pub fn dilate(m: &BinaryMask, radius: u32) -> BinaryMask {
    morph(m, radius, true)
}

/// Erosion followed by dilation with the same disk.
pub fn opening(m: &BinaryMask, radius: u32) -> BinaryMask {
    dilate(&erode(m, radius), radius)
}

/// Normalized Gaussian taps for offsets `-k..=k`, `k = ⌊3σ⌋`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let k = (3.0 * sigma).floor() as i64;
    let taps: Vec<f64> = (-k..=k)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with edge replication, clamped to `[0, 1]`.
pub fn gaussian_blur(g: &GrayImage, sigma: f64) -> SoftMask {
    let kernel = gaussian_kernel(sigma);
    let k = (kernel.len() / 2) as i64;
    let (w, h) = (g.width() as i64, g.height() as i64);
    let mut tmp = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, weight) in kernel.iter().enumerate() {
                let sx = (x + i as i64 - k).clamp(0, w - 1);
                acc += weight * g.get(sx as u32, y as u32);
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    SoftMask::from_fn(g.width(), g.height(), |x, y| {
        let mut acc = 0.0;
        for (i, weight) in kernel.iter().enumerate() {
            let sy = (y as i64 + i as i64 - k).clamp(0, h - 1);
            acc += weight * tmp[(sy * w + x as i64) as usize];
        }
        acc
    })
}

/// Binary robot mask before blurring.
pub fn robot_mask_binary(robot_only: &RgbImage, background_ro: &RgbImage, p: &RemovalParams) -> Result<BinaryMask> {
    let diff = pixel_diff(robot_only, background_ro)?;
    let m = threshold(&diff, p.threshold);
    Ok(dilate(&opening(&m, p.opening_radius), p.dilation_radius))
}

/// Soft robot mask `W` from the robot-only image and its background.
pub fn robot_mask(robot_only: &RgbImage, background_ro: &RgbImage, p: &RemovalParams) -> Result<SoftMask> {
    let binary = robot_mask_binary(robot_only, background_ro, p)?;
    Ok(gaussian_blur(&binary.as_gray(), p.blur_sigma))
}

/// Zeroes `W` on pixels where the tool changes the image, i.e. where the
/// robot+tool and robot-only captures differ by more than `tool_threshold`.
pub fn protect_tool(w: &SoftMask, robot_tool: &RgbImage, robot_only: &RgbImage, tool_threshold: f64) -> Result<SoftMask> {
    ensure_same_size(w.dimensions(), robot_tool.dimensions())?;
    let diff = pixel_diff(robot_tool, robot_only)?;
    Ok(SoftMask::from_fn(w.width(), w.height(), |x, y| {
        if diff.get(x, y) > tool_threshold {
            0.0
        } else {
            w.get(x, y)
        }
    }))
}

/// Mask actually used for compositing, honoring `p.protect_tool`.
pub fn removal_mask(
    robot_tool: &RgbImage,
    robot_only: &RgbImage,
    background_ro: &RgbImage,
    p: &RemovalParams,
) -> Result<SoftMask> {
    let w = robot_mask(robot_only, background_ro, p)?;
    if p.protect_tool {
        protect_tool(&w, robot_tool, robot_only, p.tool_threshold)
    } else {
        Ok(w)
    }
}

/// `(1 − W)·rt + W·background_rt`, rounded to 8 bits.
pub fn composite(rt: &RgbImage, background_rt: &RgbImage, w: &SoftMask) -> Result<RgbImage> {
    ensure_same_size(rt.dimensions(), background_rt.dimensions())?;
    ensure_same_size(rt.dimensions(), w.dimensions())?;
    Ok(RgbImage::from_fn(rt.width(), rt.height(), |x, y| {
        let (a, b) = (rt.get_pixel(x, y).0, background_rt.get_pixel(x, y).0);
        let wt = w.get(x, y);
        Rgb(std::array::from_fn(|c| {
            ((1.0 - wt) * a[c] as f64 + wt * b[c] as f64).round().clamp(0.0, 255.0) as u8
        }))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn solid(w: u32, h: u32, c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(c))
    }

    fn random_rgb(rng: &mut impl Rng, w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
    }

    fn random_mask(rng: &mut impl Rng, w: u32, h: u32, p: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
    }

    #[test]
    fn pixel_diff_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_rgb(&mut rng, 16, 9);
        let b = random_rgb(&mut rng, 16, 9);
        assert!(pixel_diff(&a, &a).unwrap().pixels().iter().all(|v| *v == 0.0));
        assert_eq!(pixel_diff(&a, &b).unwrap(), pixel_diff(&b, &a).unwrap());
        let d = pixel_diff(&solid(1, 1, [0; 3]), &solid(1, 1, [255; 3])).unwrap();
        assert!((d.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(matches!(pixel_diff(&a, &solid(3, 3, [0; 3])), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn threshold_cases() {
        let zeros = GrayImage::new(8, 8);
        assert_eq!(threshold(&zeros, 0.3).count(), 0);
        let half = GrayImage::from_fn(10, 4, |x, _| if x < 5 { 0.4 } else { 0.6 });
        let m = threshold(&half, 0.5);
        assert_eq!(m, BinaryMask::from_fn(10, 4, |x, _| x >= 5));
    }

    #[test]
    fn threshold_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let g = GrayImage::from_fn(20, 20, |_, _| rng.random());
            let (lo, hi) = {
                let a: f64 = rng.random_range(0.01..0.99);
                let b: f64 = rng.random_range(0.01..0.99);
                (a.min(b), a.max(b))
            };
            assert!(threshold(&g, hi).is_subset_of(&threshold(&g, lo)));
        }
    }

    #[test]
    fn opening_removes_speckle_and_keeps_squares() {
        let mut single = BinaryMask::new(21, 21);
        single.set(10, 10, true);
        assert_eq!(opening(&single, 2).count(), 0);

        let square = BinaryMask::from_fn(80, 80, |x, y| (15..65).contains(&x) && (15..65).contains(&y));
        let opened = opening(&square, 2);
        assert!(opened.is_subset_of(&square));
        // Only pixels in the 2×2 corner patches can be lost by a radius-2 disk.
        let near_corner = |v: u32| v < 17 || v >= 63;
        for y in 0..80 {
            for x in 0..80 {
                if square.get(x, y) && !(near_corner(x) && near_corner(y)) {
                    assert!(opened.get(x, y), "lost ({x}, {y})");
                }
            }
        }
        assert!(square.count() - opened.count() <= 4 * 4);
    }

    #[test]
    fn opening_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..100 {
            let m = random_mask(&mut rng, 40, 30, 0.3 + 0.4 * (i as f64 / 100.0));
            let r = 1 + (i % 3) as u32;
            let once = opening(&m, r);
            assert_eq!(opening(&once, r), once);
            assert!(once.is_subset_of(&m));
        }
    }

    #[test]
    fn dilation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_mask(&mut rng, 30, 30, 0.1);
        assert_eq!(dilate(&m, 0), m);
        assert!(m.is_subset_of(&dilate(&m, 3)));

        let mut single = BinaryMask::new(5, 5);
        single.set(2, 2, true);
        let plus = BinaryMask::from_fn(5, 5, |x, y| (x == 2 && (1..=3).contains(&y)) || (y == 2 && (1..=3).contains(&x)));
        assert_eq!(dilate(&single, 1), plus);
    }

    #[test]
    fn blur_fixes_all_ones_and_preserves_mass() {
        let ones = GrayImage::from_fn(30, 20, |_, _| 1.0);
        assert!(gaussian_blur(&ones, 1.5).weights().iter().all(|v| (*v - 1.0).abs() < 1e-12));

        let blob = GrayImage::from_fn(60, 60, |x, y| if (25..35).contains(&x) && (22..31).contains(&y) { 1.0 } else { 0.0 });
        let mass: f64 = blob.pixels().iter().sum();
        let blurred: f64 = gaussian_blur(&blob, 2.0).weights().iter().sum();
        assert!((mass - blurred).abs() < 1e-6);
    }

    #[test]
    fn blurred_step_follows_gaussian_cdf() {
        // Columns x ≥ 20 are 1. The pixel-area edge sits at x = 20 − ½.
        let sigma = 1.5;
        let step = GrayImage::from_fn(40, 5, |x, _| if x >= 20 { 1.0 } else { 0.0 });
        let w = gaussian_blur(&step, sigma);
        let profile: Vec<f64> = (0..40).map(|x| w.get(x, 2)).collect();
        assert!(profile.windows(2).all(|p| p[1] >= p[0]));
        let at_edge = 0.5 * (profile[19] + profile[20]);
        assert!((at_edge - 0.5).abs() < 0.01);
        let cdf = Normal::new(0.0, sigma).unwrap();
        for x in 10..30 {
            let expected = cdf.cdf(x as f64 - 19.5);
            assert!((profile[x] - expected).abs() < 0.02, "x={x}: {} vs {expected}", profile[x]);
        }
    }

    #[test]
    fn identical_robot_and_background_give_zero_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_rgb(&mut rng, 40, 30);
        let w = robot_mask(&img, &img, &RemovalParams::default()).unwrap();
        assert!(w.weights().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn enlarging_dilation_never_shrinks_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bg = random_rgb(&mut rng, 50, 40);
        let mut ro = bg.clone();
        for y in 10..30 {
            for x in 12..40 {
                ro.put_pixel(x, y, Rgb([250, 20, 20]));
            }
        }
        let mut p = RemovalParams::default();
        let mut prev = robot_mask(&ro, &bg, &p).unwrap();
        for r2 in 3..6 {
            p.dilation_radius = r2;
            let next = robot_mask(&ro, &bg, &p).unwrap();
            assert!(prev.weights().iter().zip(next.weights()).all(|(a, b)| *a == 0.0 || *b > 0.0));
            prev = next;
        }
    }

    #[test]
    fn composite_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rt = random_rgb(&mut rng, 20, 10);
        let bg = random_rgb(&mut rng, 20, 10);
        assert_eq!(composite(&rt, &bg, &SoftMask::constant(20, 10, 0.0)).unwrap(), rt);
        assert_eq!(composite(&rt, &bg, &SoftMask::constant(20, 10, 1.0)).unwrap(), bg);
        let gray = composite(&solid(4, 4, [0; 3]), &solid(4, 4, [255; 3]), &SoftMask::constant(4, 4, 0.5)).unwrap();
        assert!(gray.pixels().all(|p| p.0.iter().all(|c| (127..=129).contains(c))));
        assert!(composite(&rt, &bg, &SoftMask::constant(3, 3, 0.5)).is_err());
    }

    #[test]
    fn tool_protection_zeroes_changed_pixels() {
        let bg = solid(10, 10, [40, 40, 40]);
        let mut rt = bg.clone();
        rt.put_pixel(3, 3, Rgb([200, 200, 0]));
        let w = protect_tool(&SoftMask::constant(10, 10, 0.8), &rt, &bg, 0.01).unwrap();
        assert_eq!(w.get(3, 3), 0.0);
        assert_eq!(w.get(4, 3), 0.8);
    }

    proptest! {
        #[test]
        fn composite_is_deterministic(seed in any::<u64>(), wt in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rt = random_rgb(&mut rng, 8, 8);
            let bg = random_rgb(&mut rng, 8, 8);
            let w = SoftMask::constant(8, 8, wt);
            prop_assert_eq!(composite(&rt, &bg, &w).unwrap(), composite(&rt, &bg, &w).unwrap());
        }
    }
}
