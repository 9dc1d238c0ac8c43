//! Procedural 3-D textures, selectable by name through a registry.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Albedo as a function of a point in the textured primitive's local frame
/// (or of the view direction, for the background).
pub trait TexturePattern: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn albedo(&self, p: &Vector3<f64>) -> Rgb;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solid {
    pub color: Rgb,
}

impl TexturePattern for Solid {
    fn kind(&self) -> &'static str {
        "solid"
    }

    fn albedo(&self, _p: &Vector3<f64>) -> Rgb {
        self.color
    }
}

/// 3-D checkerboard with cubes of side `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checker {
    pub a: Rgb,
    pub b: Rgb,
    pub scale: f64,
}

impl TexturePattern for Checker {
    fn kind(&self) -> &'static str {
        "checker"
    }

    fn albedo(&self, p: &Vector3<f64>) -> Rgb {
        let parity: i64 = p.iter().map(|c| (c / self.scale).floor() as i64).sum();
        if parity.rem_euclid(2) == 0 {
            self.a
        } else {
            self.b
        }
    }
}

/// Parallel bands of period `scale` perpendicular to `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stripes {
    pub a: Rgb,
    pub b: Rgb,
    pub scale: f64,
    pub direction: Vector3<f64>,
}

impl TexturePattern for Stripes {
    fn kind(&self) -> &'static str {
        "stripes"
    }

    fn albedo(&self, p: &Vector3<f64>) -> Rgb {
        let phase = (p.dot(&self.direction) / self.scale).rem_euclid(1.0);
        if phase < 0.5 {
            self.a
        } else {
            self.b
        }
    }
}

/// Trilinear value noise on a lattice of spacing `scale`, blending `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub a: Rgb,
    pub b: Rgb,
    pub scale: f64,
    pub seed: u64,
}

fn lattice_value(seed: u64, i: i64, j: i64, k: i64) -> f64 {
    let mut h = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h ^= (j as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    h ^= (k as u64).wrapping_mul(0x1656_67b1_9e37_79f9);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl TexturePattern for Noise {
    fn kind(&self) -> &'static str {
        "noise"
    }

    fn albedo(&self, p: &Vector3<f64>) -> Rgb {
        let q = p / self.scale;
        let base = q.map(f64::floor);
        let f = q - base;
        let (i, j, k) = (base.x as i64, base.y as i64, base.z as i64);
        let mut v = 0.0;
        for corner in 0..8 {
            let (di, dj, dk) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = [f.x, f.y, f.z]
                .iter()
                .zip([di, dj, dk])
                .map(|(f, d)| if d == 1 { *f } else { 1.0 - f })
                .product::<f64>();
            v += w * lattice_value(self.seed, i + di as i64, j + dj as i64, k + dk as i64);
        }
        std::array::from_fn(|c| self.a[c] + (self.b[c] - self.a[c]) * v)
    }
}

/// Ranges a random texture is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureRanges {
    /// Per-channel albedo bounds.
    pub albedo: [f64; 2],
    /// Feature size bounds (m).
    pub scale: [f64; 2],
}

impl Default for TextureRanges {
    fn default() -> Self {
        TextureRanges {
            albedo: [0.1, 0.8],
            scale: [0.02, 0.08],
        }
    }
}

impl TextureRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.albedo[0] && self.albedo[0] <= self.albedo[1] && self.albedo[1] <= 1.0
            && 0.0 < self.scale[0]
            && self.scale[0] <= self.scale[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad texture ranges {self:?}")))
        }
    }

    pub fn color(&self, rng: &mut ChaCha8Rng) -> Rgb {
        std::array::from_fn(|_| rng.random_range(self.albedo[0]..=self.albedo[1]))
    }

    pub fn feature_scale(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(self.scale[0]..=self.scale[1])
    }
}

pub type TextureFactory = fn(&mut ChaCha8Rng, &TextureRanges) -> Arc<dyn TexturePattern>;

/// Name → factory table for random textures.
#[derive(Clone)]
pub struct TextureRegistry {
    factories: BTreeMap<String, TextureFactory>,
}

impl fmt::Debug for TextureRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for TextureRegistry {
    fn default() -> Self {
        let mut r = TextureRegistry {
            factories: BTreeMap::new(),
        };
        r.register("solid", |rng, ranges| Arc::new(Solid { color: ranges.color(rng) }));
        r.register("checker", |rng, ranges| {
            Arc::new(Checker {
                a: ranges.color(rng),
                b: ranges.color(rng),
                scale: ranges.feature_scale(rng),
            })
        });
        r.register("stripes", |rng, ranges| {
            let direction = Vector3::<f64>::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            Arc::new(Stripes {
                a: ranges.color(rng),
                b: ranges.color(rng),
                scale: ranges.feature_scale(rng),
                direction: if direction.iter().all(|v| v.is_finite()) { direction } else { Vector3::x() },
            })
        });
        r.register("noise", |rng, ranges| {
            Arc::new(Noise {
                a: ranges.color(rng),
                b: ranges.color(rng),
                scale: ranges.feature_scale(rng),
                seed: rng.random(),
            })
        });
        r
    }
}

impl TextureRegistry {
    pub fn register(&mut self, name: &str, factory: TextureFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, rng: &mut ChaCha8Rng, ranges: &TextureRanges) -> Result<Arc<dyn TexturePattern>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "texture",
            name: name.to_string(),
        })?;
        Ok(factory(rng, ranges))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn builtins_are_registered_and_report_their_kind() {
        let reg = TextureRegistry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in ["solid", "checker", "stripes", "noise"] {
            let t = reg.create(name, &mut rng, &TextureRanges::default()).unwrap();
            assert_eq!(t.kind(), name);
        }
        assert!(matches!(
            reg.create("plaid", &mut rng, &TextureRanges::default()),
            Err(Error::UnknownName { kind: "texture", .. })
        ));
    }

    #[test]
    fn albedo_stays_within_range() {
        let reg = TextureRegistry::default();
        let ranges = TextureRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for name in ["solid", "checker", "stripes", "noise"] {
            let t = reg.create(name, &mut rng, &ranges).unwrap();
            for _ in 0..200 {
                let p = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
                assert!(t.albedo(&p).iter().all(|c| *c >= ranges.albedo[0] - 1e-12 && *c <= ranges.albedo[1] + 1e-12));
            }
        }
    }

    #[test]
    fn checker_alternates() {
        let c = Checker {
            a: [0.0; 3],
            b: [1.0; 3],
            scale: 1.0,
        };
        assert_eq!(c.albedo(&Vector3::new(0.5, 0.5, 0.5)), [0.0; 3]);
        assert_eq!(c.albedo(&Vector3::new(1.5, 0.5, 0.5)), [1.0; 3]);
        assert_eq!(c.albedo(&Vector3::new(-0.5, 0.5, 0.5)), [1.0; 3]);
    }

    #[test]
    fn noise_is_continuous_and_deterministic() {
        let n = Noise {
            a: [0.0; 3],
            b: [1.0; 3],
            scale: 0.1,
            seed: 9,
        };
        let p = Vector3::new(0.123, -0.456, 0.789);
        assert_eq!(n.albedo(&p), n.albedo(&p));
        let q = p + Vector3::repeat(1e-7);
        assert!((n.albedo(&p)[0] - n.albedo(&q)[0]).abs() < 1e-4);
    }
}
