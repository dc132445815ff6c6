//! Boolean collision checks between spheres, capsules and oriented boxes,
//! and between a mobile manipulator and a static world.
//!
//! Solids are closed: shapes that touch collide.

use crate::kinematics::{JointConfig, KinematicChain, KinematicsError};
use crate::pose::{BasePose, Pose6};
use nalgebra::{Isometry3, Point3, Rotation3, Vector3};
use std::collections::HashSet;
use thiserror::Error;

/// Separation at or below this counts as contact.
pub const CONTACT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("self-collision pair ({0}, {1}) names adjacent links")]
    AdjacentPair(usize, usize),
    #[error("self-collision pair ({0}, {1}) names a link outside 0..={2}")]
    BadLink(usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    Capsule {
        a: Point3<f64>,
        b: Point3<f64>,
        radius: f64,
    },
    Cuboid {
        center: Point3<f64>,
        half_extents: Vector3<f64>,
        rotation: Rotation3<f64>,
    },
}

impl Shape {
    pub fn sphere(center: [f64; 3], radius: f64) -> Result<Self, GeometryError> {
        positive("sphere radius", radius)?;
        Ok(Shape::Sphere {
            center: center.into(),
            radius,
        })
    }

    pub fn capsule(a: [f64; 3], b: [f64; 3], radius: f64) -> Result<Self, GeometryError> {
        positive("capsule radius", radius)?;
        Ok(Shape::Capsule {
            a: a.into(),
            b: b.into(),
            radius,
        })
    }

    /// Oriented box from its pose (center and roll/pitch/yaw) and half-extents.
    pub fn cuboid(pose: Pose6, half_extents: [f64; 3]) -> Result<Self, GeometryError> {
        for h in half_extents {
            positive("box half-extent", h)?;
        }
        Ok(Shape::Cuboid {
            center: Point3::new(pose.x, pose.y, pose.z),
            half_extents: half_extents.into(),
            rotation: pose.rotation(),
        })
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> Shape {
        match self {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: iso * center,
                radius: *radius,
            },
            Shape::Capsule { a, b, radius } => Shape::Capsule {
                a: iso * a,
                b: iso * b,
                radius: *radius,
            },
            Shape::Cuboid {
                center,
                half_extents,
                rotation,
            } => Shape::Cuboid {
                center: iso * center,
                half_extents: *half_extents,
                rotation: iso.rotation.to_rotation_matrix() * rotation,
            },
        }
    }

    /// Grows the solid by `margin` in every direction (boxes keep sharp corners).
    pub fn inflated(&self, margin: f64) -> Shape {
        let mut s = self.clone();
        match &mut s {
            Shape::Sphere { radius, .. } | Shape::Capsule { radius, .. } => *radius += margin,
            Shape::Cuboid { half_extents, .. } => half_extents.add_scalar_mut(margin),
        }
        s
    }

    pub fn bounding_sphere(&self) -> (Point3<f64>, f64) {
        match self {
            Shape::Sphere { center, radius } => (*center, *radius),
            Shape::Capsule { a, b, radius } => (nalgebra::center(a, b), (b - a).norm() / 2.0 + radius),
            Shape::Cuboid {
                center, half_extents, ..
            } => (*center, half_extents.norm()),
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { what, value })
    }
}

pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `p1-q1` and `p2-q2`.
pub fn segment_segment_distance(p1: &Point3<f64>, q1: &Point3<f64>, p2: &Point3<f64>, q2: &Point3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-18;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

struct BoxFrame<'a> {
    center: &'a Point3<f64>,
    half: &'a Vector3<f64>,
    rot: &'a Rotation3<f64>,
}

impl BoxFrame<'_> {
    fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rot.inverse() * (p - self.center)
    }

    fn point_distance(&self, p: &Point3<f64>) -> f64 {
        let l = self.to_local(p);
        let mut d2 = 0.0;
        for i in 0..3 {
            let excess = l[i].abs() - self.half[i];
            if excess > 0.0 {
                d2 += excess * excess;
            }
        }
        d2.sqrt()
    }

    /// Liang-Barsky clip of the segment against the closed box.
    fn segment_hits(&self, a: &Point3<f64>, b: &Point3<f64>) -> bool {
        let la = self.to_local(a);
        let d = self.to_local(b) - la;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for i in 0..3 {
            let h = self.half[i];
            if d[i].abs() < 1e-300 {
                if la[i] < -h || la[i] > h {
                    return false;
                }
                continue;
            }
            let mut ta = (-h - la[i]) / d[i];
            let mut tb = (h - la[i]) / d[i];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }

    fn corners(&self) -> [Point3<f64>; 8] {
        let mut out = [Point3::origin(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let s = Vector3::new(
                if k & 1 == 0 { -1.0 } else { 1.0 },
                if k & 2 == 0 { -1.0 } else { 1.0 },
                if k & 4 == 0 { -1.0 } else { 1.0 },
            );
            *c = self.center + self.rot * self.half.component_mul(&s);
        }
        out
    }

    fn segment_distance(&self, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
        if self.segment_hits(a, b) {
            return 0.0;
        }
        // disjoint: the closest box point lies on a face (then an endpoint is
        // also closest) or on an edge
        let c = self.corners();
        let mut best = self.point_distance(a).min(self.point_distance(b));
        for (i, j) in BOX_EDGES {
            best = best.min(segment_segment_distance(a, b, &c[i], &c[j]));
        }
        best
    }
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn boxes_overlap(a: &BoxFrame, b: &BoxFrame) -> bool {
    let ra = a.rot.matrix();
    let rb = b.rot.matrix();
    let t = b.center - a.center;
    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(ra.column(i).into_owned());
        axes.push(rb.column(i).into_owned());
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = ra.column(i).cross(&rb.column(j));
            if c.norm() > 1e-9 {
                axes.push(c.normalize());
            }
        }
    }
    for axis in axes {
        let project = |r: &nalgebra::Matrix3<f64>, h: &Vector3<f64>| {
            (0..3).map(|k| h[k] * r.column(k).dot(&axis).abs()).sum::<f64>()
        };
        let gap = t.dot(&axis).abs() - project(ra, a.half) - project(rb, b.half);
        if gap > CONTACT_EPS {
            return false;
        }
    }
    true
}

/// True iff the closed solids intersect.
pub fn shapes_collide(a: &Shape, b: &Shape) -> bool {
    use Shape::*;
    let (ca, ra) = a.bounding_sphere();
    let (cb, rb) = b.bounding_sphere();
    if (ca - cb).norm() - ra - rb > CONTACT_EPS {
        return false;
    }
    match (a, b) {
        (Sphere { center: c1, radius: r1 }, Sphere { center: c2, radius: r2 }) => {
            (c1 - c2).norm() - r1 - r2 <= CONTACT_EPS
        }
        (Sphere { center, radius: r1 }, Capsule { a, b, radius: r2 })
        | (Capsule { a, b, radius: r2 }, Sphere { center, radius: r1 }) => {
            point_segment_distance(center, a, b) - r1 - r2 <= CONTACT_EPS
        }
        (
            Capsule {
                a: a1,
                b: b1,
                radius: r1,
            },
            Capsule {
                a: a2,
                b: b2,
                radius: r2,
            },
        ) => segment_segment_distance(a1, b1, a2, b2) - r1 - r2 <= CONTACT_EPS,
        (
            Sphere { center: p, radius },
            Cuboid {
                center,
                half_extents,
                rotation,
            },
        )
        | (
            Cuboid {
                center,
                half_extents,
                rotation,
            },
            Sphere { center: p, radius },
        ) => {
            let bf = BoxFrame {
                center,
                half: half_extents,
                rot: rotation,
            };
            bf.point_distance(p) - radius <= CONTACT_EPS
        }
        (
            Capsule { a, b, radius },
            Cuboid {
                center,
                half_extents,
                rotation,
            },
        )
        | (
            Cuboid {
                center,
                half_extents,
                rotation,
            },
            Capsule { a, b, radius },
        ) => {
            let bf = BoxFrame {
                center,
                half: half_extents,
                rot: rotation,
            };
            bf.segment_distance(a, b) - radius <= CONTACT_EPS
        }
        (
            Cuboid {
                center: c1,
                half_extents: h1,
                rotation: r1,
            },
            Cuboid {
                center: c2,
                half_extents: h2,
                rotation: r2,
            },
        ) => boxes_overlap(
            &BoxFrame {
                center: c1,
                half: h1,
                rot: r1,
            },
            &BoxFrame {
                center: c2,
                half: h2,
                rot: r2,
            },
        ),
    }
}

/// Collision shapes of the robot. `links[0]` rides on the mobile base,
/// `links[i]` on the frame after joint `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    links: Vec<Vec<Shape>>,
    self_pairs: Vec<(usize, usize)>,
    margin: f64,
}

impl RobotGeometry {
    pub fn new(links: Vec<Vec<Shape>>, self_pairs: Vec<(usize, usize)>, margin: f64) -> Result<Self, GeometryError> {
        let last = links.len().saturating_sub(1);
        for &(i, j) in &self_pairs {
            if i > last || j > last {
                return Err(GeometryError::BadLink(i, j, last));
            }
            if i.abs_diff(j) <= 1 {
                return Err(GeometryError::AdjacentPair(i, j));
            }
        }
        if !(margin >= 0.0) {
            return Err(GeometryError::NonPositive {
                what: "collision margin",
                value: margin,
            });
        }
        Ok(Self {
            links,
            self_pairs,
            margin,
        })
    }

    pub fn links(&self) -> &[Vec<Shape>] {
        &self.links
    }

    pub fn self_pairs(&self) -> &[(usize, usize)] {
        &self.self_pairs
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin.max(0.0);
        self
    }

    /// Robot shapes in the world frame, one list per link.
    pub fn posed(
        &self,
        chain: &KinematicChain,
        base: &BasePose,
        config: &JointConfig,
    ) -> Result<Vec<Vec<Shape>>, KinematicsError> {
        let base_iso = base.to_isometry();
        let frames = chain.link_frames(config)?;
        Ok(self
            .links
            .iter()
            .enumerate()
            .map(|(i, shapes)| {
                let f = frames.get(i).copied().unwrap_or(*frames.last().unwrap());
                let iso = base_iso * f;
                shapes.iter().map(|s| s.transformed(&iso).inflated(self.margin)).collect()
            })
            .collect())
    }

    fn posed_base(&self, base: &BasePose) -> Vec<Shape> {
        let iso = base.to_isometry();
        self.links
            .first()
            .map(|s| s.iter().map(|s| s.transformed(&iso).inflated(self.margin)).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Tray,
    Object,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGroup {
    pub id: String,
    pub kind: GroupKind,
    /// World-frame shapes.
    pub shapes: Vec<Shape>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    pub groups: Vec<ShapeGroup>,
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_group(&mut self, id: impl Into<String>, kind: GroupKind, shapes: Vec<Shape>) {
        self.groups.push(ShapeGroup {
            id: id.into(),
            kind,
            shapes,
        });
    }

    pub fn group(&self, id: &str) -> Option<&ShapeGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    /// Same world with every shape moved by `iso`.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> World {
        World {
            groups: self
                .groups
                .iter()
                .map(|g| ShapeGroup {
                    id: g.id.clone(),
                    kind: g.kind,
                    shapes: g.shapes.iter().map(|s| s.transformed(iso)).collect(),
                })
                .collect(),
        }
    }

    /// Without the named group.
    pub fn without(&self, id: &str) -> World {
        World {
            groups: self.groups.iter().filter(|g| g.id != id).cloned().collect(),
        }
    }

    fn hits(&self, shape: &Shape, ignore: &HashSet<String>) -> bool {
        self.groups
            .iter()
            .filter(|g| !ignore.contains(&g.id))
            .flat_map(|g| &g.shapes)
            .any(|w| shapes_collide(shape, w))
    }
}

/// True iff a listed self-collision pair collides or any robot shape hits a
/// world shape outside `ignore`.
pub fn robot_in_collision(
    chain: &KinematicChain,
    geometry: &RobotGeometry,
    base: &BasePose,
    config: &JointConfig,
    world: &World,
    ignore: &HashSet<String>,
) -> Result<bool, KinematicsError> {
    let posed = geometry.posed(chain, base, config)?;
    for &(i, j) in &geometry.self_pairs {
        if posed[i].iter().any(|a| posed[j].iter().any(|b| shapes_collide(a, b))) {
            return Ok(true);
        }
    }
    Ok(posed.iter().flatten().any(|s| world.hits(s, ignore)))
}

/// Whether the base link alone overlaps the world at `base`.
pub fn base_in_collision(geometry: &RobotGeometry, base: &BasePose, world: &World) -> bool {
    let none = HashSet::new();
    geometry.posed_base(base).iter().any(|s| world.hits(s, &none))
}
