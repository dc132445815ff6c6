//! Independent reference implementations used by the integration and
//! acceptance tests.

#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use rand::Rng;
use reachplan::collision::Shape;
use reachplan::grid::{BaseGridSpec, Mask};
use reachplan::kinematics::{DhJoint, JointConfig, KinematicChain};
use reachplan::pipeline::DbParams;
use reachplan::pose::Pose6;
use reachplan::scene::{parse_scene, Scene};
use reachplan::sequencer::{CoverInstance, CoverKey};
use std::f64::consts::{PI, TAU};

pub fn scene_path(name: &str) -> String {
    format!("{}/../../scenes/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_scene(name: &str) -> Scene {
    parse_scene(&std::fs::read_to_string(scene_path(name)).expect("scene file")).expect("valid scene")
}

/// Database resolution used with the bundled desk scenes.
pub fn desk_db_params() -> DbParams {
    DbParams {
        dtheta: TAU / 72.0,
        voxel: [0.03, 0.03, 0.1, TAU, TAU, TAU / 24.0],
        w_min: 0.0,
    }
}

// ------------------------------------------------------------ kinematics

/// Law-of-cosines inverse kinematics of a planar two-link arm, both elbow
/// branches (duplicates when the elbow is straight).
pub fn two_link_branches(l1: f64, l2: f64, x: f64, y: f64) -> Vec<[f64; 2]> {
    let r = (x * x + y * y).sqrt();
    let cos_elbow = ((l1 * l1 + l2 * l2 - r * r) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let inner = PI - cos_elbow.acos();
    let cos_a = ((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0);
    let a = cos_a.acos();
    let phi = y.atan2(x);
    vec![[phi - a, inner], [phi + a, -inner]]
}

pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> KinematicChain {
    let joints = (0..n)
        .map(|_| DhJoint {
            a: rng.random_range(-0.5..0.5),
            alpha: rng.random_range(-PI..PI),
            d: rng.random_range(-0.5..0.5),
            theta_offset: rng.random_range(-PI..PI),
            limit_lo: -PI,
            limit_hi: PI,
        })
        .collect();
    let tool = Pose6::new(
        rng.random_range(-0.1..0.1),
        rng.random_range(-0.1..0.1),
        rng.random_range(0.0..0.2),
        0.0,
        0.0,
        0.0,
    );
    KinematicChain::new(joints, tool).unwrap()
}

pub fn random_config<R: Rng>(rng: &mut R, n: usize) -> JointConfig {
    JointConfig((0..n).map(|_| rng.random_range(-PI..PI)).collect())
}

/// Central-difference Jacobian: translation rows from position
/// differences, rotation rows from the rotation vector of
/// `R(q + h) R(q - h)^T / 2h`.
pub fn fd_jacobian(chain: &KinematicChain, q: &JointConfig, h: f64) -> Vec<[f64; 6]> {
    (0..q.len())
        .map(|i| {
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus.0[i] += h;
            minus.0[i] -= h;
            let a = chain.end_effector(&plus).unwrap();
            let b = chain.end_effector(&minus).unwrap();
            let dp = (a.translation.vector - b.translation.vector) / (2.0 * h);
            let dr = (a.rotation * b.rotation.inverse()).scaled_axis() / (2.0 * h);
            [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z]
        })
        .collect()
}

// --------------------------------------------------------------- geometry

/// Signed distance from a point to a shape, negative inside.
pub fn signed_distance(s: &Shape, p: &Point3<f64>) -> f64 {
    match s {
        Shape::Sphere { center, radius } => (p - center).norm() - radius,
        Shape::Capsule { a, b, radius } => {
            let ab = b - a;
            let t = if ab.norm_squared() > 0.0 {
                ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (p - (a + ab * t)).norm() - radius
        }
        Shape::Cuboid {
            center,
            half_extents,
            rotation,
        } => {
            let local = rotation.inverse() * (p - center);
            let q = local.abs() - half_extents;
            let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
            outside + q.x.max(q.y).max(q.z).min(0.0)
        }
    }
}

fn fibonacci_sphere(center: &Point3<f64>, r: f64, n: usize, out: &mut Vec<Point3<f64>>) {
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let rho = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        out.push(center + Vector3::new(rho * th.cos(), rho * th.sin(), z) * r);
    }
}

/// Surface points with spacing at most about `h`.
pub fn surface_samples(s: &Shape, h: f64) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    match s {
        Shape::Sphere { center, radius } => {
            let n = ((4.0 * PI * radius * radius) / (h * h) * 2.0).ceil() as usize;
            fibonacci_sphere(center, *radius, n.max(8), &mut out);
        }
        Shape::Capsule { a, b, radius } => {
            // hemispherical caps: full spheres, the half inside the cylinder is harmless
            let n = ((4.0 * PI * radius * radius) / (h * h) * 2.0).ceil() as usize;
            fibonacci_sphere(a, *radius, n.max(8), &mut out);
            fibonacci_sphere(b, *radius, n.max(8), &mut out);
            let axis = b - a;
            let len = axis.norm();
            if len > 0.0 {
                let u = axis / len;
                let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
                let e1 = u.cross(&helper).normalize();
                let e2 = u.cross(&e1);
                let rings = (len / h).ceil() as usize + 1;
                let around = ((TAU * radius) / h).ceil() as usize * 2;
                for i in 0..=rings {
                    let c = a + axis * (i as f64 / rings as f64);
                    for k in 0..around {
                        let t = TAU * k as f64 / around as f64;
                        out.push(c + (e1 * t.cos() + e2 * t.sin()) * *radius);
                    }
                }
            }
        }
        Shape::Cuboid {
            center,
            half_extents,
            rotation,
        } => {
            let he = half_extents;
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = ((2.0 * he[u]) / h).ceil() as usize + 1;
                let nv = ((2.0 * he[v]) / h).ceil() as usize + 1;
                for sign in [-1.0, 1.0] {
                    for i in 0..=nu {
                        for j in 0..=nv {
                            let mut local = Vector3::zeros();
                            local[axis] = sign * he[axis];
                            local[u] = -he[u] + 2.0 * he[u] * i as f64 / nu as f64;
                            local[v] = -he[v] + 2.0 * he[v] * j as f64 / nv as f64;
                            out.push(center + rotation * local);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Smallest signed distance from either shape's surface samples to the
/// other shape. Negative means overlap; positive values overestimate the
/// gap by at most the sample spacing.
pub fn sampled_separation(a: &Shape, b: &Shape, h: f64) -> f64 {
    let ab = surface_samples(a, h)
        .iter()
        .map(|p| signed_distance(b, p))
        .fold(f64::INFINITY, f64::min);
    let ba = surface_samples(b, h)
        .iter()
        .map(|p| signed_distance(a, p))
        .fold(f64::INFINITY, f64::min);
    ab.min(ba)
}

pub fn random_shape<R: Rng>(rng: &mut R, spread: f64) -> Shape {
    let p = |rng: &mut R| [rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
    match rng.random_range(0..3) {
        0 => Shape::sphere(p(rng), rng.random_range(0.03..0.2)).unwrap(),
        1 => Shape::capsule(p(rng), p(rng), rng.random_range(0.02..0.12)).unwrap(),
        _ => {
            let c = p(rng);
            let pose = Pose6::new(
                c[0],
                c[1],
                c[2],
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI..PI),
            );
            Shape::cuboid(
                pose,
                [rng.random_range(0.03..0.2), rng.random_range(0.03..0.2), rng.random_range(0.03..0.2)],
            )
            .unwrap()
        }
    }
}

// ------------------------------------------------------------- regions

/// Brute-force inscribed circle in cell units: the feasible cell with the
/// largest squared distance to any infeasible or off-grid cell center, the
/// lowest `(row, col)` on ties.
pub fn brute_inscribed(mask: &Mask) -> Option<((usize, usize), u64)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut best: Option<((usize, usize), u64)> = None;
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r as usize, c as usize) {
                continue;
            }
            let mut d2 = u64::MAX;
            for rr in -1..=h {
                for cc in -1..=w {
                    if !mask.get_signed(rr, cc) {
                        let d = ((rr - r).pow(2) + (cc - c).pow(2)) as u64;
                        d2 = d2.min(d);
                    }
                }
            }
            if best.is_none_or(|(_, b)| d2 > b) {
                best = Some(((r as usize, c as usize), d2));
            }
        }
    }
    best
}

/// Mask of cells whose centers fall inside any of the given disks.
pub fn disk_mask(grid: &BaseGridSpec, disks: &[([f64; 2], f64)]) -> Mask {
    Mask::from_fn(grid.width, grid.height, |r, c| {
        let [x, y] = grid.cell_center(r, c);
        disks
            .iter()
            .any(|(ctr, rad)| (x - ctr[0]).powi(2) + (y - ctr[1]).powi(2) <= rad * rad)
    })
}

// -------------------------------------------------------------- covering

/// Best cover by enumerating every subset of candidates, under the same
/// preference order as the solver. `None` if nothing covers.
pub fn exhaustive_cover(inst: &CoverInstance) -> Option<CoverKey> {
    let rank = inst.rank_order();
    let n = rank.len();
    assert!(n <= 20, "exhaustive search is exponential");
    let mut best: Option<CoverKey> = None;
    for bits in 0u32..(1 << n) {
        let ranks: Vec<usize> = (0..n).filter(|p| bits >> p & 1 == 1).collect();
        if let Some(k) = CoverKey::of(inst, &rank, &ranks) {
            if best.as_ref().is_none_or(|b| k < *b) {
                best = Some(k);
            }
        }
    }
    best
}

/// Key of a solver answer given as candidate indices.
pub fn key_of(inst: &CoverInstance, selection: &[usize]) -> Option<CoverKey> {
    let rank = inst.rank_order();
    let ranks: Vec<usize> = selection
        .iter()
        .map(|i| rank.iter().position(|r| r == i).unwrap())
        .collect();
    CoverKey::of(inst, &rank, &ranks)
}

// ------------------------------------------------------------------ paths

/// Shortest open path by depth-first search over visiting orders, last
/// stop first.
pub fn brute_path_length(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]]) -> f64 {
    fn rec(goal: [f64; 2], stops: &[[f64; 2]], used: &mut Vec<bool>, here: [f64; 2], acc: f64, best: &mut f64) {
        if used.iter().all(|u| *u) {
            let total = acc + ((here[0] - goal[0]).powi(2) + (here[1] - goal[1]).powi(2)).sqrt();
            *best = best.min(total);
            return;
        }
        for i in (0..stops.len()).rev() {
            if !used[i] {
                used[i] = true;
                let d = ((here[0] - stops[i][0]).powi(2) + (here[1] - stops[i][1]).powi(2)).sqrt();
                rec(goal, stops, used, stops[i], acc + d, best);
                used[i] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(goal, stops, &mut vec![false; stops.len()], start, 0.0, &mut best);
    best
}
