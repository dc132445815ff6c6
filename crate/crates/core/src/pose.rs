//! Six-DOF poses with a fixed roll-pitch-yaw convention.
//!
//! Orientation is `R = Rz(yaw) * Ry(pitch) * Rx(roll)`. A canonical pose has
//! roll and yaw in `[-pi, pi)` and pitch in `[-pi/2, pi/2]`.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Angles closer than this to zero are snapped to exactly zero.
const ZERO_SNAP: f64 = 1e-12;

/// Threshold on `|cos(pitch)|` below which a pose is reported as near gimbal lock.
pub const GIMBAL_EPS: f64 = 1e-6;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a - TAU * ((a + PI) / TAU).floor();
    if w >= PI {
        w -= TAU;
    }
    if w < -PI {
        w += TAU;
    }
    if w.abs() < ZERO_SNAP {
        0.0
    } else {
        w
    }
}

/// Signed shortest angular difference `a - b`, in `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for Pose6 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose6 {
    pub const fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
        }
    }

    pub const fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    /// Returns the equivalent pose with angles in canonical ranges.
    ///
    /// A pitch outside `[-pi/2, pi/2]` is replaced by the equivalent
    /// `(roll + pi, pi - pitch, yaw + pi)` triple before wrapping.
    pub fn canonical(&self) -> Self {
        let mut roll = self.roll;
        let mut pitch = wrap_angle(self.pitch);
        let mut yaw = self.yaw;
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            roll += PI;
            pitch = wrap_angle(PI - pitch);
            yaw += PI;
        }
        if pitch.abs() < ZERO_SNAP {
            pitch = 0.0;
        }
        Self::new(self.x, self.y, self.z, wrap_angle(roll), pitch, wrap_angle(yaw))
    }

    /// True when the pitch sits at a gimbal singularity and roll/yaw are not
    /// separately identifiable.
    pub fn near_gimbal(&self) -> bool {
        self.pitch.cos().abs() < GIMBAL_EPS
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.x, self.y, self.z),
            UnitQuaternion::from_rotation_matrix(&self.rotation()),
        )
    }

    /// Canonical pose of a rigid transform.
    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let t = iso.translation.vector;
        let r = iso.rotation.to_rotation_matrix();
        let (roll, pitch, yaw) = rpy_from_matrix(r.matrix());
        Self::new(t.x, t.y, t.z, roll, pitch, yaw).canonical()
    }
}

/// Roll, pitch and yaw of a rotation matrix under `Rz * Ry * Rx`.
pub fn rpy_from_matrix(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let cp = (m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt();
    let pitch = (-m[(2, 0)]).atan2(cp);
    if cp < 1e-12 {
        // gimbal lock: only roll -/+ yaw is determined, put it all in yaw
        (0.0, pitch, (-m[(0, 1)]).atan2(m[(1, 1)]))
    } else {
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }
}

/// Planar pose of the mobile base: position on the floor and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl BasePose {
    pub const fn new(x: f64, y: f64, phi: f64) -> Self {
        Self { x, y, phi }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::new(Vector3::new(self.x, self.y, 0.0), Vector3::new(0.0, 0.0, self.phi))
    }
}

/// Which pose components a comparison constrains. `true` = constrained.
pub type AxisMask = [bool; 6];

pub const ALL_AXES: AxisMask = [true; 6];
pub const POSITION_AXES: AxisMask = [true, true, true, false, false, false];

/// Weighted distance between poses.
///
/// Position differences count in meters, wrapped angular differences are
/// scaled by `angular_weight` (m/rad). Components cleared in `mask` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMetric {
    pub angular_weight: f64,
    pub mask: AxisMask,
}

impl Default for PoseMetric {
    fn default() -> Self {
        Self {
            angular_weight: 1.0,
            mask: ALL_AXES,
        }
    }
}

impl PoseMetric {
    pub fn with_mask(mask: AxisMask) -> Self {
        Self {
            mask,
            ..Self::default()
        }
    }

    /// Per-component differences `a - b`, angles wrapped, unweighted.
    pub fn component_diff(a: &Pose6, b: &Pose6) -> [f64; 6] {
        [
            a.x - b.x,
            a.y - b.y,
            a.z - b.z,
            angle_diff(a.roll, b.roll),
            angle_diff(a.pitch, b.pitch),
            angle_diff(a.yaw, b.yaw),
        ]
    }

    /// Norm of a raw 6-vector of component magnitudes under this metric.
    pub fn norm(&self, d: &[f64; 6]) -> f64 {
        d.iter()
            .enumerate()
            .filter(|(i, _)| self.mask[*i])
            .map(|(i, v)| {
                let w = if i < 3 { 1.0 } else { self.angular_weight };
                (w * v) * (w * v)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, a: &Pose6, b: &Pose6) -> f64 {
        self.norm(&Self::component_diff(a, b))
    }
}
