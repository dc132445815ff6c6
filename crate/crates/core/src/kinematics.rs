//! Serial-chain manipulator model: forward kinematics, geometric Jacobian,
//! manipulability, and a damped least-squares IK refiner.

use crate::pose::{AxisMask, Pose6, PoseMetric};
use nalgebra::{DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("config has {got} joint values but the chain has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain has no joints")]
    EmptyChain,
    #[error("joint {joint}: limits [{lo}, {hi}] are empty or exceed [-2pi, 2pi]")]
    BadLimits { joint: usize, lo: f64, hi: f64 },
    #[error("non-finite value during IK iteration {iteration}")]
    Numerical { iteration: usize },
}

/// One revolute joint in standard Denavit-Hartenberg form:
/// `Rz(theta + theta_offset) * Tz(d) * Tx(a) * Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
    pub limit_lo: f64,
    pub limit_hi: f64,
}

impl DhJoint {
    pub fn transform(&self, theta: f64) -> Isometry3<f64> {
        let rz = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, self.d),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta + self.theta_offset),
        );
        let rx = Isometry3::from_parts(
            Translation3::new(self.a, 0.0, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha),
        );
        rz * rx
    }

    pub fn span(&self) -> f64 {
        self.limit_hi - self.limit_lo
    }

    /// Joints whose limits cover a whole turn are treated as continuous.
    pub fn is_full_turn(&self) -> bool {
        self.span() >= TAU - 1e-9
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.limit_lo - 1e-12 && theta <= self.limit_hi + 1e-12
    }

    /// Brings `theta` into the limits, first by whole turns, then by clamping.
    pub fn fit(&self, theta: f64) -> f64 {
        if self.contains(theta) {
            return theta;
        }
        for k in [-2.0, -1.0, 1.0, 2.0] {
            let t = theta + k * TAU;
            if self.contains(t) {
                return t;
            }
        }
        theta.clamp(self.limit_lo, self.limit_hi)
    }
}

/// Rows of the Jacobian that enter the manipulability measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Planar chains use the (x, y) rows; spatial chains use all six rows
    /// when they have at least six joints and the position rows otherwise.
    #[default]
    Auto,
    Planar,
    Position,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    joints: Vec<DhJoint>,
    tool: Pose6,
    task_space: TaskSpace,
}

/// Joint-angle vector, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Infinity-norm distance, with whole-turn wrapping on every joint.
    pub fn wrapped_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| crate::pose::angle_diff(*a, *b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl KinematicChain {
    pub fn new(joints: Vec<DhJoint>, tool: Pose6) -> Result<Self, KinematicsError> {
        if joints.is_empty() {
            return Err(KinematicsError::EmptyChain);
        }
        for (i, j) in joints.iter().enumerate() {
            let ok = j.limit_lo < j.limit_hi && j.limit_lo >= -TAU - 1e-12 && j.limit_hi <= TAU + 1e-12;
            if !ok || !j.limit_lo.is_finite() || !j.limit_hi.is_finite() {
                return Err(KinematicsError::BadLimits {
                    joint: i,
                    lo: j.limit_lo,
                    hi: j.limit_hi,
                });
            }
        }
        Ok(Self {
            joints,
            tool,
            task_space: TaskSpace::Auto,
        })
    }

    /// Horizontal planar arm: every joint about the vertical axis, links of
    /// the given lengths, full-turn limits `[-pi, pi)`.
    pub fn planar(lengths: &[f64]) -> Self {
        let joints = lengths
            .iter()
            .map(|&a| DhJoint {
                a,
                alpha: 0.0,
                d: 0.0,
                theta_offset: 0.0,
                limit_lo: -std::f64::consts::PI,
                limit_hi: std::f64::consts::PI,
            })
            .collect();
        Self::new(joints, Pose6::identity()).expect("planar chain is valid")
    }

    pub fn with_task_space(mut self, task_space: TaskSpace) -> Self {
        self.task_space = task_space;
        self
    }

    pub fn joints(&self) -> &[DhJoint] {
        &self.joints
    }

    pub fn tool(&self) -> Pose6 {
        self.tool
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// All joint axes parallel to the base z axis.
    pub fn is_planar(&self) -> bool {
        self.joints.iter().all(|j| j.alpha.sin().abs() < 1e-12)
    }

    pub fn effective_task_space(&self) -> TaskSpace {
        match self.task_space {
            TaskSpace::Auto if self.is_planar() => TaskSpace::Planar,
            TaskSpace::Auto if self.dof() >= 6 => TaskSpace::Full,
            TaskSpace::Auto => TaskSpace::Position,
            other => other,
        }
    }

    /// SHA-256 over the little-endian encoding of every chain parameter.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"chain/v1");
        h.update((self.joints.len() as u64).to_le_bytes());
        for j in &self.joints {
            for v in [j.a, j.alpha, j.d, j.theta_offset, j.limit_lo, j.limit_hi] {
                h.update(v.to_le_bytes());
            }
        }
        for v in self.tool.to_array() {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    fn check(&self, config: &JointConfig) -> Result<(), KinematicsError> {
        if config.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: config.len(),
            });
        }
        Ok(())
    }

    /// Frames of the base (index 0) and after every joint (index i), in the
    /// chain base frame. The tool is not applied.
    pub fn link_frames(&self, config: &JointConfig) -> Result<Vec<Isometry3<f64>>, KinematicsError> {
        self.check(config)?;
        let mut frames = Vec::with_capacity(self.dof() + 1);
        let mut t = Isometry3::identity();
        frames.push(t);
        for (j, &q) in self.joints.iter().zip(config.as_slice()) {
            t *= j.transform(q);
            frames.push(t);
        }
        Ok(frames)
    }

    pub fn end_effector(&self, config: &JointConfig) -> Result<Isometry3<f64>, KinematicsError> {
        let frames = self.link_frames(config)?;
        Ok(frames[frames.len() - 1] * self.tool.to_isometry())
    }

    pub fn jacobian(&self, config: &JointConfig) -> Result<DMatrix<f64>, KinematicsError> {
        let frames = self.link_frames(config)?;
        let p_end = (frames[frames.len() - 1] * self.tool.to_isometry())
            .translation
            .vector;
        let n = self.dof();
        let mut jac = DMatrix::zeros(6, n);
        for i in 0..n {
            // joint i rotates about z of the frame preceding it
            let f = &frames[i];
            let axis = f.rotation * Vector3::z();
            let lin = axis.cross(&(p_end - f.translation.vector));
            for r in 0..3 {
                jac[(r, i)] = lin[r];
                jac[(r + 3, i)] = axis[r];
            }
        }
        Ok(jac)
    }

    pub fn manipulability(&self, config: &JointConfig) -> Result<f64, KinematicsError> {
        let jac = self.jacobian(config)?;
        let rows: Vec<usize> = match self.effective_task_space() {
            TaskSpace::Planar => vec![0, 1],
            TaskSpace::Position => vec![0, 1, 2],
            _ => (0..6).collect(),
        };
        let sub = jac.select_rows(rows.iter());
        Ok(gram_volume(&sub))
    }
}

/// `sqrt(det(J * J^T))` for a wide matrix via the QR factor of `J^T`:
/// `J J^T = R^T R`, so the volume is `|prod R_ii|`. Taller-than-wide input
/// has a singular `J J^T` and yields zero.
fn gram_volume(j: &DMatrix<f64>) -> f64 {
    if j.nrows() > j.ncols() {
        return 0.0;
    }
    let qr = j.transpose().qr();
    let r = qr.r();
    (0..j.nrows()).map(|i| r[(i, i)]).product::<f64>().abs()
}

pub fn forward_kinematics(chain: &KinematicChain, config: &JointConfig) -> Result<Pose6, KinematicsError> {
    Ok(Pose6::from_isometry(&chain.end_effector(config)?))
}

pub fn jacobian(chain: &KinematicChain, config: &JointConfig) -> Result<DMatrix<f64>, KinematicsError> {
    chain.jacobian(config)
}

pub fn manipulability(chain: &KinematicChain, config: &JointConfig) -> Result<f64, KinematicsError> {
    chain.manipulability(config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub metric: PoseMetric,
    pub damping: f64,
    pub max_step: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            metric: PoseMetric::default(),
            damping: 1e-3,
            max_step: 0.2,
        }
    }
}

impl RefineOptions {
    pub fn masked(mask: AxisMask) -> Self {
        Self {
            metric: PoseMetric::with_mask(mask),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IkOutcome {
    Converged {
        config: JointConfig,
        iterations: usize,
        error: f64,
    },
    NoConvergence,
}

impl IkOutcome {
    pub fn config(&self) -> Option<&JointConfig> {
        match self {
            IkOutcome::Converged { config, .. } => Some(config),
            IkOutcome::NoConvergence => None,
        }
    }
}

/// Task-space error `target - current`: position difference and the
/// rotation vector of `R_target * R_current^T`.
fn pose_error(target: &Isometry3<f64>, current: &Isometry3<f64>) -> [f64; 6] {
    let dp = target.translation.vector - current.translation.vector;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z]
}

/// Damped pseudo-inverse iteration seeded from `seed`.
///
/// Success means the pose metric between the FK of the result and `target`
/// is at most `opts.tol`, with every joint inside its limits.
pub fn refine_ik(
    chain: &KinematicChain,
    seed: &JointConfig,
    target: &Pose6,
    opts: &RefineOptions,
) -> Result<IkOutcome, KinematicsError> {
    chain.check(seed)?;
    let goal = target.to_isometry();
    let rows: Vec<usize> = (0..6).filter(|&i| opts.metric.mask[i]).collect();
    let mut q: Vec<f64> = seed
        .as_slice()
        .iter()
        .zip(chain.joints())
        .map(|(&v, j)| j.fit(v))
        .collect();

    for iteration in 0..=opts.max_iter {
        let cfg = JointConfig(q.clone());
        let pose = forward_kinematics(chain, &cfg)?;
        let err = opts.metric.distance(&pose, target);
        if !err.is_finite() {
            return Err(KinematicsError::Numerical { iteration });
        }
        if err <= opts.tol {
            return Ok(IkOutcome::Converged {
                config: cfg,
                iterations: iteration,
                error: err,
            });
        }
        if iteration == opts.max_iter {
            break;
        }
        let e_full = pose_error(&goal, &chain.end_effector(&cfg)?);
        let jac = chain.jacobian(&cfg)?;
        let mut jr = jac.select_rows(rows.iter());
        let mut e = DVector::from_iterator(rows.len(), rows.iter().map(|&r| e_full[r]));
        for (k, &r) in rows.iter().enumerate() {
            if r >= 3 {
                jr.row_mut(k).scale_mut(opts.metric.angular_weight);
                e[k] *= opts.metric.angular_weight;
            }
        }
        let m = jr.nrows();
        let jjt = &jr * jr.transpose() + DMatrix::identity(m, m) * opts.damping;
        let Some(sol) = jjt.lu().solve(&e) else {
            return Err(KinematicsError::Numerical { iteration });
        };
        let dq = jr.transpose() * sol;
        for (i, j) in chain.joints().iter().enumerate() {
            let step = dq[i].clamp(-opts.max_step, opts.max_step);
            if !step.is_finite() {
                return Err(KinematicsError::Numerical { iteration });
            }
            q[i] = j.fit(q[i] + step);
        }
    }
    Ok(IkOutcome::NoConvergence)
}

/// Closed-form inverse kinematics of a planar two-link arm.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanarIk {
    /// Zero, one or two `[theta1, theta2]` solutions, angles wrapped to `[-pi, pi)`.
    Solutions(Vec<[f64; 2]>),
    /// Equal links and a target at the shoulder: every `theta1` works with `theta2 = pi`.
    AnyShoulderAngle,
}

pub fn planar_two_link_ik(l1: f64, l2: f64, x: f64, y: f64) -> PlanarIk {
    use crate::pose::wrap_angle;
    assert!(l1 > 0.0 && l2 > 0.0, "link lengths must be positive");
    let r2 = x * x + y * y;
    if r2 < 1e-24 && (l1 - l2).abs() < 1e-12 {
        return PlanarIk::AnyShoulderAngle;
    }
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if c2.abs() > 1.0 + 1e-12 {
        return PlanarIk::Solutions(Vec::new());
    }
    let c2 = c2.clamp(-1.0, 1.0);
    let t2 = c2.acos();
    let branches: Vec<f64> = if t2 < 1e-9 || (std::f64::consts::PI - t2) < 1e-9 {
        vec![t2]
    } else {
        vec![t2, -t2]
    };
    let sols = branches
        .into_iter()
        .map(|t2| {
            let t1 = y.atan2(x) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
            [wrap_angle(t1), wrap_angle(t2)]
        })
        .collect();
    PlanarIk::Solutions(sols)
}
