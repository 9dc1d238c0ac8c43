//! Denavit–Hartenberg serial chain: forward kinematics, geometric Jacobian
//! and damped-least-squares inverse kinematics.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{rotation_log, Frame, RigidTransform};

pub const DOF: usize = 7;

pub type Jacobian = SMatrix<f64, 6, DOF>;

/// One standard DH row: `Rz(θ + offset) · Tz(d) · Tx(a) · Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimit {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.lower && q <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub [f64; DOF]);

impl JointVector {
    pub fn as_vector(&self) -> SVector<f64, DOF> {
        SVector::from(self.0)
    }

    pub fn from_vector(v: &SVector<f64, DOF>) -> Self {
        let mut q = [0.0; DOF];
        q.copy_from_slice(v.as_slice());
        JointVector(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub dh: [DhRow; DOF],
    pub limits: [JointLimit; DOF],
    /// Collision/render radius of the capsule spanning each DH row.
    pub link_radii: [f64; DOF],
}

impl Default for KinematicChain {
    /// Generic iiwa-like layout with alternating z/y joint axes.
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let row = |alpha: f64, d: f64| DhRow {
            a: 0.0,
            alpha,
            d,
            theta_offset: 0.0,
        };
        let lim = |deg: f64| JointLimit {
            lower: -deg.to_radians(),
            upper: deg.to_radians(),
        };
        KinematicChain {
            dh: [
                row(-FRAC_PI_2, 0.34),
                row(FRAC_PI_2, 0.0),
                row(FRAC_PI_2, 0.40),
                row(-FRAC_PI_2, 0.0),
                row(-FRAC_PI_2, 0.40),
                row(FRAC_PI_2, 0.0),
                row(0.0, 0.126),
            ],
            limits: [
                lim(170.0),
                lim(120.0),
                lim(170.0),
                lim(120.0),
                lim(170.0),
                lim(120.0),
                lim(175.0),
            ],
            link_radii: [0.07, 0.07, 0.06, 0.06, 0.05, 0.05, 0.04],
        }
    }
}

fn dh_transform(row: &DhRow, q: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let (st, ct) = (q + row.theta_offset).sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    let r = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
    let p = Vector3::new(row.a * ct, row.a * st, row.d);
    (r, p)
}

impl KinematicChain {
    pub fn validate(&self) -> Result<()> {
        if self.link_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidConfig("link radii must be positive".into()));
        }
        if self.limits.iter().any(|l| !(l.lower < l.upper)) {
            return Err(Error::InvalidConfig(
                "joint limits need lower < upper".into(),
            ));
        }
        Ok(())
    }

    pub fn check_limits(&self, q: &JointVector) -> Result<()> {
        for (joint, (value, limit)) in q.0.iter().zip(&self.limits).enumerate() {
            if !limit.contains(*value) {
                return Err(Error::LimitViolation {
                    joint,
                    value: *value,
                    lower: limit.lower,
                    upper: limit.upper,
                });
            }
        }
        Ok(())
    }

    pub fn mid_range(&self) -> JointVector {
        JointVector(self.limits.map(|l| l.mid()))
    }

    pub fn clamp(&self, q: &JointVector) -> JointVector {
        let mut out = q.0;
        for (v, l) in out.iter_mut().zip(&self.limits) {
            *v = v.clamp(l.lower, l.upper);
        }
        JointVector(out)
    }

    /// Upper bound on the distance from the base origin to the flange.
    pub fn reach(&self) -> f64 {
        self.dh.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }

    /// Poses of frames 0..=7 in the base frame (frame 0 is the base).
    pub fn link_frames(&self, q: &JointVector) -> Result<[RigidTransform; DOF + 1]> {
        self.check_limits(q)?;
        Ok(self.link_frames_unchecked(q))
    }

    fn raw_frames(&self, q: &JointVector) -> [(Matrix3<f64>, Vector3<f64>); DOF + 1] {
        let mut frames = [(Matrix3::identity(), Vector3::zeros()); DOF + 1];
        for i in 0..DOF {
            let (r_prev, p_prev) = frames[i];
            let (r, p) = dh_transform(&self.dh[i], q.0[i]);
            frames[i + 1] = (r_prev * r, r_prev * p + p_prev);
        }
        frames
    }

    fn link_frames_unchecked(&self, q: &JointVector) -> [RigidTransform; DOF + 1] {
        let raw = self.raw_frames(q);
        std::array::from_fn(|i| {
            let from = match i {
                0 => Frame::Base,
                DOF => Frame::Flange,
                _ => Frame::Link(i as u8),
            };
            RigidTransform::from_parts_unchecked(
                crate::se3::orthonormalize(&raw[i].0),
                raw[i].1,
                from,
                Frame::Base,
            )
        })
    }

    /// Joint origins (frames 0..=7) in the base frame.
    pub fn joint_origins(&self, q: &JointVector) -> Result<[Vector3<f64>; DOF + 1]> {
        self.check_limits(q)?;
        Ok(self.raw_frames(q).map(|(_, p)| p))
    }

    pub fn forward_kinematics(&self, q: &JointVector) -> Result<RigidTransform> {
        self.check_limits(q)?;
        let (r, p) = self.raw_frames(q)[DOF];
        Ok(RigidTransform::from_parts_unchecked(
            crate::se3::orthonormalize(&r),
            p,
            Frame::Flange,
            Frame::Base,
        ))
    }

    /// Geometric Jacobian in the base frame: rows 0..3 are the flange-origin
    /// linear velocity, rows 3..6 the angular velocity.
    pub fn jacobian(&self, q: &JointVector) -> Result<Jacobian> {
        self.check_limits(q)?;
        Ok(jacobian_from_frames(&self.raw_frames(q)))
    }

    pub fn inverse_kinematics(
        &self,
        target: &RigidTransform,
        seed: &JointVector,
        options: &IkOptions,
    ) -> Result<JointVector> {
        if target.from_frame() != Frame::Flange || target.to_frame() != Frame::Base {
            return Err(Error::FrameMismatch {
                expected: Frame::Flange,
                found: target.from_frame(),
            });
        }
        self.check_limits(seed)?;
        match self.solve_ik(target, seed, options, options.nullspace_gain) {
            Err(Error::NoConvergence { .. }) if options.nullspace_gain > 0.0 => {
                // The mid-range pull occasionally drags the solver into a
                // different basin; retry as a plain damped least squares.
                self.solve_ik(target, seed, options, 0.0)
            }
            other => other,
        }
    }

    fn solve_ik(
        &self,
        target: &RigidTransform,
        seed: &JointVector,
        options: &IkOptions,
        nullspace_gain: f64,
    ) -> Result<JointVector> {
        let pose_error = |q: &JointVector| {
            let (r, p) = self.raw_frames(q)[DOF];
            let e_p = target.translation() - p;
            let e_r = rotation_log(&(target.rotation() * r.transpose()));
            (e_p, e_r)
        };

        let mut q = *seed;
        let (mut e_p, mut e_r) = pose_error(&q);
        if target.translation().norm() > self.reach() {
            return Err(Error::NoConvergence {
                iterations: 0,
                position_error: e_p.norm(),
                orientation_error: e_r.norm(),
            });
        }

        let mid = self.mid_range().as_vector();
        let damping_sq = options.damping * options.damping;
        for _ in 0..options.max_iterations {
            if e_p.norm() < options.position_tolerance && e_r.norm() < options.orientation_tolerance {
                return Ok(q);
            }
            let frames = self.raw_frames(&q);
            let j = jacobian_from_frames(&frames);
            let mut err = SVector::<f64, 6>::zeros();
            err.fixed_rows_mut::<3>(0).copy_from(&e_p);
            err.fixed_rows_mut::<3>(3).copy_from(&e_r);

            let jjt = j * j.transpose() + SMatrix::<f64, 6, 6>::identity() * damping_sq;
            let Some(chol) = jjt.cholesky() else {
                break;
            };
            let mut dq = j.transpose() * chol.solve(&err);

            // Mid-range pull in the exact null space of J, only while far
            // from the target so it cannot stall final convergence.
            if nullspace_gain > 0.0 && e_p.norm() > 1e-4 {
                let svd = j.svd(false, true);
                let v_t = svd.v_t.expect("svd computes v_t");
                let mut projector = SMatrix::<f64, DOF, DOF>::identity();
                for (k, s) in svd.singular_values.iter().enumerate() {
                    if *s > 1e-9 {
                        let row = v_t.row(k);
                        projector -= row.transpose() * row;
                    }
                }
                dq += projector * ((mid - q.as_vector()) * nullspace_gain);
            }

            let max_step = dq.amax();
            if max_step > options.max_step {
                dq *= options.max_step / max_step;
            }
            q = self.clamp(&JointVector::from_vector(&(q.as_vector() + dq)));
            (e_p, e_r) = pose_error(&q);
        }

        let accept_p = options.position_tolerance.max(options.accept_tolerance);
        let accept_r = options.orientation_tolerance.max(options.accept_tolerance);
        if e_p.norm() < accept_p && e_r.norm() < accept_r {
            return Ok(q);
        }
        Err(Error::NoConvergence {
            iterations: options.max_iterations,
            position_error: e_p.norm(),
            orientation_error: e_r.norm(),
        })
    }
}

fn jacobian_from_frames(frames: &[(Matrix3<f64>, Vector3<f64>); DOF + 1]) -> Jacobian {
    let p_end = frames[DOF].1;
    let mut j = Jacobian::zeros();
    for i in 0..DOF {
        let (r, o) = &frames[i];
        let z = r.column(2).into_owned();
        let lin = z.cross(&(p_end - o));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    j
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// Largest allowed change of any joint per iteration (rad).
    pub max_step: f64,
    pub nullspace_gain: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Position (m) and orientation (rad) error still returned as a solution
    /// when the iteration budget runs out, e.g. close to a singularity.
    pub accept_tolerance: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            damping: 1e-3,
            max_iterations: 200,
            max_step: 0.2,
            nullspace_gain: 0.1,
            position_tolerance: 1e-9,
            orientation_tolerance: 1e-9,
            accept_tolerance: 1e-6,
        }
    }
}

/// Free-function form of [`KinematicChain::forward_kinematics`].
pub fn forward_kinematics(chain: &KinematicChain, q: &JointVector) -> Result<RigidTransform> {
    chain.forward_kinematics(q)
}

/// Free-function form of [`KinematicChain::inverse_kinematics`] with
/// default solver options.
pub fn inverse_kinematics(
    chain: &KinematicChain,
    target: &RigidTransform,
    seed: &JointVector,
) -> Result<JointVector> {
    chain.inverse_kinematics(target, seed, &IkOptions::default())
}
