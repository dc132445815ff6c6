//! Six-dimensional voxelized reachability database.
//!
//! The joint space is sampled on a regular grid, every sample is pushed
//! through forward kinematics, and the resulting `(pose, config,
//! manipulability)` records are bucketed by the voxel their pose falls in.
//! Looking up the voxels around a target pose yields a diverse set of
//! approximate IK solutions for it.

use crate::kinematics::{forward_kinematics, JointConfig, KinematicChain, KinematicsError};
use crate::pose::{Pose6, PoseMetric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"RPDB";
pub const FORMAT_VERSION: u32 = 1;

/// `v / step` values this close to an integer are treated as lying on the
/// cell boundary, so decimal inputs like `0.6 / 0.05` land in cell 12.
const BOUNDARY_SNAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("voxel grid length {index} is {value}, must be positive and finite")]
    BadVoxelSpec { index: usize, value: f64 },
    #[error("joint {joint}: sampling step {step} must be positive and finite")]
    BadSampling { joint: usize, step: f64 },
    #[error("sampling spec has {got} steps for a {expected}-joint chain")]
    SamplingDimension { expected: usize, got: usize },
    #[error("every one of the {sampled} samples was rejected; database is empty")]
    Empty { sampled: u64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("database was built for a different chain")]
    FingerprintMismatch,
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("bad magic bytes {0:?}, not a reachability database")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated in header")]
    TruncatedHeader,
    #[error("file truncated in voxel directory entry {entry}")]
    TruncatedDirectory { entry: u64 },
    #[error("file truncated at record {record}")]
    TruncatedRecord { record: u64 },
    #[error("file truncated before checksum")]
    TruncatedChecksum,
    #[error("content checksum mismatch")]
    ChecksumMismatch,
    #[error("voxel directory is inconsistent: {0}")]
    BadDirectory(String),
    #[error("record {record} is stored under a voxel its pose does not index to")]
    InconsistentIndex { record: u64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Grid lengths `[dx, dy, dz, droll, dpitch, dyaw]` (meters, radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelSpec {
    lengths: [f64; 6],
}

impl VoxelSpec {
    pub fn new(lengths: [f64; 6]) -> Result<Self, DbError> {
        for (index, &value) in lengths.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(DbError::BadVoxelSpec { index, value });
            }
        }
        Ok(Self { lengths })
    }

    /// Same length on the three position axes and on the three angular axes.
    pub fn uniform(position: f64, angle: f64) -> Result<Self, DbError> {
        Self::new([position, position, position, angle, angle, angle])
    }

    pub fn lengths(&self) -> [f64; 6] {
        self.lengths
    }

    /// Whether the angular cells tile the circle exactly (roll/yaw divide
    /// 2pi, pitch divides pi), so wrap-around cell boundaries line up.
    pub fn tiles_circle(&self) -> bool {
        let divides = |span: f64, step: f64| {
            let k = span / step;
            (k - k.round()).abs() <= 1e-12 * k.max(1.0)
        };
        divides(TAU, self.lengths[3]) && divides(PI, self.lengths[4]) && divides(TAU, self.lengths[5])
    }
}

fn cell_index(value: f64, step: f64) -> i32 {
    let q = value / step;
    let r = q.round();
    if (q - r).abs() < BOUNDARY_SNAP {
        r as i32
    } else {
        q.floor() as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelKey(pub [i32; 6]);

pub fn voxel_index(pose: &Pose6, spec: &VoxelSpec) -> VoxelKey {
    let p = pose.canonical();
    let v = p.to_array();
    let mut key = [0i32; 6];
    for d in 0..6 {
        key[d] = cell_index(v[d], spec.lengths[d]);
    }
    VoxelKey(key)
}

/// Optional stochastic thinning: a sample survives with probability
/// `min(1, (w / w_ref)^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thinning {
    pub w_ref: f64,
    pub exponent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    /// Per-joint grid step, radians.
    pub steps: Vec<f64>,
    /// Samples with manipulability below this are dropped.
    pub w_min: f64,
    pub thinning: Option<Thinning>,
}

impl SamplingSpec {
    pub fn uniform(step: f64, joints: usize) -> Self {
        Self {
            steps: vec![step; joints],
            w_min: 0.0,
            thinning: None,
        }
    }

    pub fn with_w_min(mut self, w_min: f64) -> Self {
        self.w_min = w_min;
        self
    }

    fn validate(&self, chain: &KinematicChain) -> Result<(), DbError> {
        if self.steps.len() != chain.dof() {
            return Err(DbError::SamplingDimension {
                expected: chain.dof(),
                got: self.steps.len(),
            });
        }
        for (joint, &step) in self.steps.iter().enumerate() {
            if !(step.is_finite() && step > 0.0) {
                return Err(DbError::BadSampling { joint, step });
            }
        }
        Ok(())
    }

    /// Grid values for every joint. Full-turn joints sample `[lo, hi)`,
    /// limited joints `[lo, hi]`.
    pub fn joint_grids(&self, chain: &KinematicChain) -> Result<Vec<Vec<f64>>, DbError> {
        self.validate(chain)?;
        Ok(chain
            .joints()
            .iter()
            .zip(&self.steps)
            .map(|(j, &step)| {
                let mut vals = Vec::new();
                let mut k = 0u64;
                loop {
                    let v = j.limit_lo + k as f64 * step;
                    let inside = if j.is_full_turn() {
                        v < j.limit_hi - 1e-9
                    } else {
                        v <= j.limit_hi + 1e-12
                    };
                    if !inside {
                        break;
                    }
                    vals.push(v);
                    k += 1;
                }
                vals
            })
            .collect())
    }

    /// Number of joint-space samples a build will visit.
    pub fn sample_count(&self, chain: &KinematicChain) -> Result<u128, DbError> {
        Ok(self
            .joint_grids(chain)?
            .iter()
            .map(|g| g.len() as u128)
            .product())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachRecord {
    pub pose: Pose6,
    pub config: JointConfig,
    pub manipulability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachDb {
    spec: VoxelSpec,
    fingerprint: [u8; 32],
    dof: usize,
    voxels: BTreeMap<VoxelKey, Vec<ReachRecord>>,
    record_count: u64,
}

/// Build statistics reported alongside the database.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildStats {
    pub sampled: u64,
    pub stored: u64,
    pub voxels: u64,
}

pub fn build(chain: &KinematicChain, sampling: &SamplingSpec, spec: &VoxelSpec) -> Result<ReachDb, DbError> {
    build_with_stats(chain, sampling, spec).map(|(db, _)| db)
}

pub fn build_with_stats(
    chain: &KinematicChain,
    sampling: &SamplingSpec,
    spec: &VoxelSpec,
) -> Result<(ReachDb, BuildStats), DbError> {
    let grids = sampling.joint_grids(chain)?;
    let total: u64 = grids.iter().map(|g| g.len() as u64).product();
    let n = chain.dof();

    let accepted: Vec<Result<Option<ReachRecord>, KinematicsError>> = (0..total as usize)
        .into_par_iter()
        .with_min_len(1024)
        .map(|index| {
            let mut rem = index;
            let mut q = vec![0.0; n];
            for d in (0..n).rev() {
                let len = grids[d].len();
                q[d] = grids[d][rem % len];
                rem /= len;
            }
            let config = JointConfig(q);
            let w = chain.manipulability(&config)?;
            if w < sampling.w_min {
                return Ok(None);
            }
            if let Some(t) = sampling.thinning {
                let p = if t.exponent == 0.0 {
                    1.0
                } else {
                    (w / t.w_ref).powf(t.exponent).min(1.0)
                };
                let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
                rng.set_stream(index as u64);
                if rng.random::<f64>() >= p {
                    return Ok(None);
                }
            }
            let pose = forward_kinematics(chain, &config)?;
            Ok(Some(ReachRecord {
                pose,
                config,
                manipulability: w,
            }))
        })
        .collect();

    let mut voxels: BTreeMap<VoxelKey, Vec<ReachRecord>> = BTreeMap::new();
    let mut stored = 0u64;
    for rec in accepted {
        if let Some(rec) = rec? {
            voxels.entry(voxel_index(&rec.pose, spec)).or_default().push(rec);
            stored += 1;
        }
    }
    if stored == 0 {
        return Err(DbError::Empty { sampled: total });
    }
    let stats = BuildStats {
        sampled: total,
        stored,
        voxels: voxels.len() as u64,
    };
    Ok((
        ReachDb {
            spec: *spec,
            fingerprint: chain.fingerprint(),
            dof: n,
            voxels,
            record_count: stored,
        },
        stats,
    ))
}

/// Voxel indices along one axis that overlap the open interval
/// `(center - half, center + half)`.
fn linear_range(center: f64, half: f64, step: f64) -> Vec<i32> {
    let lo = cell_index(center - half, step);
    let hi = {
        let q = (center + half) / step;
        let r = q.round();
        if (q - r).abs() < BOUNDARY_SNAP {
            r as i32 - 1
        } else {
            q.ceil() as i32 - 1
        }
    };
    (lo..=hi).collect()
}

/// Like [`linear_range`] for an angle living on `[-pi, pi)`.
fn wrapped_range(center: f64, half: f64, step: f64) -> Vec<i32> {
    let first = cell_index(-PI, step);
    let last = cell_index(PI - 1e-12, step);
    if 2.0 * half >= TAU {
        return (first..=last).collect();
    }
    let lo = center - half;
    let hi = center + half;
    let mut out = Vec::new();
    let mut push_piece = |a: f64, b: f64| {
        out.extend(linear_range((a + b) / 2.0, (b - a) / 2.0, step).into_iter().filter(|k| *k >= first && *k <= last));
    };
    if lo < -PI {
        push_piece(lo + TAU, PI);
        push_piece(-PI, hi);
    } else if hi > PI {
        push_piece(lo, PI);
        push_piece(-PI, hi - TAU);
    } else {
        push_piece(lo, hi);
    }
    // the wrapped pieces are half-open at +pi; -pi is always a real boundary
    out.sort_unstable();
    out.dedup();
    out
}

fn pitch_range(center: f64, half: f64, step: f64) -> Vec<i32> {
    let first = cell_index(-FRAC_PI_2, step);
    let last = cell_index(FRAC_PI_2, step);
    linear_range(center, half, step)
        .into_iter()
        .filter(|k| *k >= first && *k <= last)
        .collect()
}

impl ReachDb {
    pub fn spec(&self) -> &VoxelSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn record_count(&self) -> u64 {
        self.record_count
    }

    pub fn voxel_count(&self) -> u64 {
        self.voxels.len() as u64
    }

    pub fn voxels(&self) -> impl Iterator<Item = (&VoxelKey, &[ReachRecord])> {
        self.voxels.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn records(&self) -> impl Iterator<Item = &ReachRecord> {
        self.voxels.values().flatten()
    }

    pub fn verify_chain(&self, chain: &KinematicChain) -> Result<(), DbError> {
        if chain.fingerprint() != self.fingerprint || chain.dof() != self.dof {
            return Err(DbError::FingerprintMismatch);
        }
        Ok(())
    }

    /// Records stored in the voxel containing `target`.
    pub fn query(&self, target: &Pose6) -> &[ReachRecord] {
        self.voxels
            .get(&voxel_index(target, &self.spec))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Keys of the voxels overlapping the open box `target +/- grid lengths`.
    pub fn interval_keys(&self, target: &Pose6) -> Vec<VoxelKey> {
        let t = target.canonical().to_array();
        let l = self.spec.lengths;
        let axes: [Vec<i32>; 6] = [
            linear_range(t[0], l[0], l[0]),
            linear_range(t[1], l[1], l[1]),
            linear_range(t[2], l[2], l[2]),
            wrapped_range(t[3], l[3], l[3]),
            pitch_range(t[4], l[4], l[4]),
            wrapped_range(t[5], l[5], l[5]),
        ];
        let mut keys = vec![[0i32; 6]];
        for (d, axis) in axes.iter().enumerate() {
            keys = keys
                .into_iter()
                .flat_map(|k| {
                    axis.iter().map(move |&i| {
                        let mut k = k;
                        k[d] = i;
                        k
                    })
                })
                .collect();
        }
        keys.into_iter().map(VoxelKey).collect()
    }

    /// Records from every voxel overlapping the open interval
    /// `(target - dG, target + dG)`, angular axes wrapped. Ordered by voxel
    /// key, then by build order.
    pub fn query_interval(&self, target: &Pose6) -> Vec<&ReachRecord> {
        let mut keys = self.interval_keys(target);
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .filter_map(|k| self.voxels.get(k))
            .flatten()
            .collect()
    }

    /// Upper bound of `metric` between a target and any record
    /// `query_interval` can return for it: each component differs by less
    /// than two grid lengths.
    pub fn interval_bound(&self, metric: &PoseMetric) -> f64 {
        let l = self.spec.lengths;
        metric.norm(&[2.0 * l[0], 2.0 * l[1], 2.0 * l[2], 2.0 * l[3], 2.0 * l[4], 2.0 * l[5]])
    }

    /// Record counts collapsed over the three angular axes.
    pub fn reachability_projection(&self) -> BTreeMap<[i32; 3], u64> {
        let mut out = BTreeMap::new();
        for (k, recs) in &self.voxels {
            *out.entry([k.0[0], k.0[1], k.0[2]]).or_insert(0) += recs.len() as u64;
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(96 + self.voxels.len() * 36 + self.record_count as usize * 8 * (7 + self.dof));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dof as u32).to_le_bytes());
        buf.extend_from_slice(&self.fingerprint);
        for l in self.spec.lengths {
            buf.extend_from_slice(&l.to_le_bytes());
        }
        buf.extend_from_slice(&(self.voxels.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.record_count.to_le_bytes());
        let mut offset = 0u64;
        for (k, recs) in &self.voxels {
            for i in k.0 {
                buf.extend_from_slice(&i.to_le_bytes());
            }
            buf.extend_from_slice(&offset.to_le_bytes());
            buf.extend_from_slice(&(recs.len() as u32).to_le_bytes());
            offset += recs.len() as u64;
        }
        for rec in self.records() {
            for v in rec.pose.to_array() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for v in rec.config.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&rec.manipulability.to_le_bytes());
        }
        let digest: [u8; 32] = Sha256::digest(&buf).into();
        buf.extend_from_slice(&digest);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LoadError> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4).ok_or(LoadError::TruncatedHeader)?.try_into().unwrap();
        if &magic != MAGIC {
            return Err(LoadError::BadMagic(magic));
        }
        let version = r.u32().ok_or(LoadError::TruncatedHeader)?;
        if version != FORMAT_VERSION {
            return Err(LoadError::UnsupportedVersion(version));
        }
        let dof = r.u32().ok_or(LoadError::TruncatedHeader)? as usize;
        let fingerprint: [u8; 32] = r.take(32).ok_or(LoadError::TruncatedHeader)?.try_into().unwrap();
        let mut lengths = [0.0; 6];
        for l in &mut lengths {
            *l = r.f64().ok_or(LoadError::TruncatedHeader)?;
        }
        let spec = VoxelSpec::new(lengths).map_err(|e| LoadError::BadDirectory(e.to_string()))?;
        let voxel_count = r.u64().ok_or(LoadError::TruncatedHeader)?;
        let record_count = r.u64().ok_or(LoadError::TruncatedHeader)?;

        let mut directory = Vec::new();
        for entry in 0..voxel_count {
            let mut key = [0i32; 6];
            for k in &mut key {
                *k = r.i32().ok_or(LoadError::TruncatedDirectory { entry })?;
            }
            let offset = r.u64().ok_or(LoadError::TruncatedDirectory { entry })?;
            let count = r.u32().ok_or(LoadError::TruncatedDirectory { entry })?;
            directory.push((VoxelKey(key), offset, count));
        }
        let mut expected_offset = 0u64;
        for (i, (key, offset, count)) in directory.iter().enumerate() {
            if *offset != expected_offset || *count == 0 {
                return Err(LoadError::BadDirectory(format!("entry {i} has offset {offset}, count {count}")));
            }
            if i > 0 && directory[i - 1].0 >= *key {
                return Err(LoadError::BadDirectory(format!("entry {i} out of order")));
            }
            expected_offset += *count as u64;
        }
        if expected_offset != record_count {
            return Err(LoadError::BadDirectory(format!(
                "directory covers {expected_offset} records, header says {record_count}"
            )));
        }

        let mut voxels = BTreeMap::new();
        let mut record = 0u64;
        for (key, _, count) in &directory {
            let mut recs = Vec::with_capacity(*count as usize);
            for _ in 0..*count {
                let mut pose = [0.0; 6];
                for v in &mut pose {
                    *v = r.f64().ok_or(LoadError::TruncatedRecord { record })?;
                }
                let mut q = Vec::with_capacity(dof);
                for _ in 0..dof {
                    q.push(r.f64().ok_or(LoadError::TruncatedRecord { record })?);
                }
                let manipulability = r.f64().ok_or(LoadError::TruncatedRecord { record })?;
                let pose = Pose6::from_array(pose);
                if voxel_index(&pose, &spec) != *key {
                    return Err(LoadError::InconsistentIndex { record });
                }
                recs.push(ReachRecord {
                    pose,
                    config: JointConfig(q),
                    manipulability,
                });
                record += 1;
            }
            voxels.insert(*key, recs);
        }
        let body_len = r.pos;
        let stored: [u8; 32] = r.take(32).ok_or(LoadError::TruncatedChecksum)?.try_into().unwrap();
        let digest: [u8; 32] = Sha256::digest(&bytes[..body_len]).into();
        if stored != digest {
            return Err(LoadError::ChecksumMismatch);
        }
        Ok(Self {
            spec,
            fingerprint,
            dof,
            voxels,
            record_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Ok(Self::from_bytes(&bytes)?)
    }

    /// Loads and checks that the file was built for `chain`.
    pub fn load_for_chain(path: impl AsRef<Path>, chain: &KinematicChain) -> Result<Self, DbError> {
        let db = Self::load(path)?;
        db.verify_chain(chain)?;
        Ok(db)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn i32(&mut self) -> Option<i32> {
        self.take(4).map(|b| i32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}
