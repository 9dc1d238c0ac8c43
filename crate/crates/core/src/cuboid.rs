//! Largest axis-aligned box inside both camera frusta and the workspace.
//!
//! For an axis-aligned box every linear constraint `n·x ≥ b` is tightest at
//! one corner (take `min` on axes where `nᵢ > 0`, `max` elsewhere), so "all 8
//! corners inside" is one linear inequality in the six corner coordinates.
//! The objective `Σ log extentᵢ` is concave, which makes the whole problem
//! convex; it is solved with a log-barrier Newton method.

use nalgebra::{SMatrix, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{HalfSpace, StereoRig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cuboid {
    pub min_corner: Vector3<f64>,
    pub max_corner: Vector3<f64>,
}

impl Cuboid {
    pub fn new(min_corner: Vector3<f64>, max_corner: Vector3<f64>) -> Result<Self> {
        if (0..3).all(|i| min_corner[i] < max_corner[i]) {
            Ok(Self {
                min_corner,
                max_corner,
            })
        } else {
            Err(Error::InvalidConfig(format!(
                "cuboid needs min < max, got {min_corner:?} / {max_corner:?}"
            )))
        }
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max_corner - self.min_corner
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min_corner + self.max_corner)
    }

    pub fn volume(&self) -> f64 {
        self.extents().product()
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min_corner[i] && p[i] <= self.max_corner[i])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        std::array::from_fn(|k| {
            Vector3::new(
                if k & 1 == 0 { self.min_corner.x } else { self.max_corner.x },
                if k & 2 == 0 { self.min_corner.y } else { self.max_corner.y },
                if k & 4 == 0 { self.min_corner.z } else { self.max_corner.z },
            )
        })
    }

    /// Six half-spaces describing the box itself.
    pub fn halfspaces(&self) -> [HalfSpace; 6] {
        std::array::from_fn(|k| {
            let axis = k % 3;
            let mut n = Vector3::zeros();
            if k < 3 {
                n[axis] = 1.0;
                HalfSpace {
                    normal: n,
                    offset: self.min_corner[axis],
                }
            } else {
                n[axis] = -1.0;
                HalfSpace {
                    normal: n,
                    offset: -self.max_corner[axis],
                }
            }
        })
    }

    /// Smallest corner slack over all constraints.
    pub fn min_slack(&self, constraints: &[HalfSpace]) -> f64 {
        constraints
            .iter()
            .flat_map(|h| self.corners().map(|c| h.slack(&c)))
            .fold(f64::INFINITY, f64::min)
    }
}

type Vec6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;

/// Constraint on the stacked corner vector `z = (min, max)`: `row·z ≥ rhs`.
fn corner_row(h: &HalfSpace) -> (Vec6, f64) {
    let mut row = Vec6::zeros();
    for i in 0..3 {
        if h.normal[i] >= 0.0 {
            row[i] = h.normal[i];
        } else {
            row[3 + i] = h.normal[i];
        }
    }
    (row, h.offset)
}

const SEED_SAMPLES: usize = 100_000;

fn find_seed_point(constraints: &[HalfSpace], workspace: &Cuboid) -> Result<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for _ in 0..SEED_SAMPLES {
        let p = Vector3::from_fn(|i, _| rng.random_range(workspace.min_corner[i]..workspace.max_corner[i]));
        let slack = constraints.iter().map(|h| h.slack(&p)).fold(f64::INFINITY, f64::min);
        if slack > 0.0 && best.is_none_or(|(s, _)| slack > s) {
            best = Some((slack, p));
        }
    }
    best.map(|(_, p)| p).ok_or(Error::EmptyIntersection)
}

/// Barrier objective `t·Σ log(extent) + Σ log(slack)` and its derivatives.
fn barrier(z: &Vec6, t: f64, rows: &[(Vec6, f64)]) -> Option<(f64, Vec6, Mat6)> {
    let mut value = 0.0;
    let mut grad = Vec6::zeros();
    let mut hess = Mat6::zeros();
    for i in 0..3 {
        let e = z[3 + i] - z[i];
        if !(e > 0.0) {
            return None;
        }
        value += t * e.ln();
        let g = t / e;
        grad[3 + i] += g;
        grad[i] -= g;
        let h = t / (e * e);
        hess[(i, i)] -= h;
        hess[(3 + i, 3 + i)] -= h;
        hess[(i, 3 + i)] += h;
        hess[(3 + i, i)] += h;
    }
    for (row, rhs) in rows {
        let s = row.dot(z) - rhs;
        if !(s > 0.0) {
            return None;
        }
        value += s.ln();
        grad += row / s;
        hess -= row * row.transpose() / (s * s);
    }
    Some((value, grad, hess))
}

fn maximize_barrier(mut z: Vec6, t: f64, rows: &[(Vec6, f64)]) -> Vec6 {
    for _ in 0..100 {
        let Some((value, grad, hess)) = barrier(&z, t, rows) else {
            break;
        };
        // Newton step for a concave maximization: solve (−H)·dz = g.
        let Some(chol) = (-hess).cholesky() else {
            break;
        };
        let dz = chol.solve(&grad);
        let decrement = grad.dot(&dz);
        if decrement < 1e-14 {
            break;
        }
        let mut step = 1.0;
        loop {
            let cand = z + dz * step;
            if let Some((v, _, _)) = barrier(&cand, t, rows) {
                if v >= value + 0.25 * step * decrement {
                    z = cand;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-16 {
                return z;
            }
        }
    }
    z
}

/// Largest-volume axis-aligned cuboid inside both frusta and `workspace`.
pub fn largest_cuboid_in(constraints: &[HalfSpace], workspace: &Cuboid) -> Result<Cuboid> {
    let mut all: Vec<HalfSpace> = constraints.to_vec();
    all.extend(workspace.halfspaces());
    let seed = find_seed_point(&all, workspace)?;

    let rows: Vec<(Vec6, f64)> = all.iter().map(corner_row).collect();
    // Start from a tiny strictly feasible box around the seed.
    let mut half = 1e-3;
    let mut z = loop {
        let z = Vec6::from_fn(|k, _| if k < 3 { seed[k] - half } else { seed[k - 3] + half });
        if rows.iter().all(|(r, b)| r.dot(&z) - b > 0.0) {
            break z;
        }
        half *= 0.5;
        if half < 1e-12 {
            return Err(Error::EmptyIntersection);
        }
    };

    // Central path: the duality gap after the last stage is m/t.
    let m = rows.len() as f64;
    let mut t = 1.0;
    while m / t > 1e-12 {
        z = maximize_barrier(z, t, &rows);
        t *= 20.0;
    }
    Cuboid::new(z.fixed_rows::<3>(0).into_owned(), z.fixed_rows::<3>(3).into_owned())
}

/// Largest cuboid inside the common view of `rig` and within `workspace`.
pub fn largest_common_cuboid(rig: &StereoRig, workspace: &Cuboid) -> Result<Cuboid> {
    largest_cuboid_in(&rig.halfspaces(), workspace)
}
