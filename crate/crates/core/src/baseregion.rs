//! Base regions: the grid cells from which every object of a tray can be
//! grasped with a collision-free configuration drawn from the database.

use crate::collision::{base_in_collision, robot_in_collision, RobotGeometry, World};
use crate::grid::{BaseGridSpec, GridError, Mask};
use crate::kinematics::{refine_ik, IkOutcome, JointConfig, KinematicChain, KinematicsError, RefineOptions};
use crate::pose::{BasePose, Pose6};
use crate::reachdb::{DbError, ReachDb, ReachRecord};
use rayon::prelude::*;
use std::collections::HashSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("object {0} has no grasp poses")]
    EmptyGraspSet(String),
    #[error("no grasp sets given")]
    NoObjects,
    #[error("region file: {0}")]
    Parse(String),
}

/// Candidate grasps for one object. Grasp poses are expressed in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspSet {
    pub object_id: String,
    pub object_pose: Pose6,
    pub grasps: Vec<Pose6>,
}

/// Target pose of a grasp in the frame of a base standing at `base`.
pub fn grasp_in_base_frame(grasp: &Pose6, object_pose: &Pose6, base: &BasePose) -> Pose6 {
    let world = object_pose.to_isometry() * grasp.to_isometry();
    Pose6::from_isometry(&(base.to_isometry().inverse() * world))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryMode {
    /// Only the voxel containing the target.
    Exact,
    /// All voxels overlapping `target +/- dG`.
    #[default]
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WitnessStrategy {
    /// Try every configuration the database returns.
    #[default]
    MultiWitness,
    /// Mimic a conventional IK solver: keep only the lowest-norm returned
    /// configuration and accept or reject the grasp on it alone.
    SingleWitness,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOptions {
    pub query: QueryMode,
    pub strategy: WitnessStrategy,
    pub refine: Option<RefineOptions>,
}

impl Default for GraspOptions {
    fn default() -> Self {
        Self {
            query: QueryMode::Interval,
            strategy: WitnessStrategy::MultiWitness,
            refine: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub grasp_index: usize,
    pub config: JointConfig,
    /// Pose the database stored for the unrefined configuration.
    pub stored_pose: Pose6,
    /// Base-frame grasp target.
    pub target: Pose6,
    pub refined: bool,
}

/// Scene pieces every graspability check needs.
#[derive(Clone, Copy)]
pub struct RobotContext<'a> {
    pub db: &'a ReachDb,
    pub chain: &'a KinematicChain,
    pub geometry: &'a RobotGeometry,
    pub world: &'a World,
}

impl<'a> RobotContext<'a> {
    pub fn new(
        db: &'a ReachDb,
        chain: &'a KinematicChain,
        geometry: &'a RobotGeometry,
        world: &'a World,
    ) -> Result<Self, RegionError> {
        db.verify_chain(chain)?;
        Ok(Self {
            db,
            chain,
            geometry,
            world,
        })
    }
}

fn lowest_norm<'r>(records: &[&'r ReachRecord]) -> Option<&'r ReachRecord> {
    let norm = |r: &ReachRecord| r.config.as_slice().iter().map(|v| v * v).sum::<f64>();
    records
        .iter()
        .copied()
        .fold(None, |best: Option<&ReachRecord>, r| match best {
            Some(b) if norm(b) <= norm(r) => Some(b),
            _ => Some(r),
        })
}

/// First collision-free witness for grasping the object from `base`, trying
/// grasps in order and database records in query order.
pub fn object_graspable(
    ctx: &RobotContext,
    graspset: &GraspSet,
    base: &BasePose,
    options: &GraspOptions,
) -> Result<Option<Witness>, RegionError> {
    let ignore: HashSet<String> = std::iter::once(graspset.object_id.clone()).collect();
    for (grasp_index, grasp) in graspset.grasps.iter().enumerate() {
        let target = grasp_in_base_frame(grasp, &graspset.object_pose, base);
        let records: Vec<&ReachRecord> = match options.query {
            QueryMode::Exact => ctx.db.query(&target).iter().collect(),
            QueryMode::Interval => ctx.db.query_interval(&target),
        };
        let candidates: Vec<&ReachRecord> = match options.strategy {
            WitnessStrategy::MultiWitness => records,
            WitnessStrategy::SingleWitness => lowest_norm(&records).into_iter().collect(),
        };
        for rec in candidates {
            if robot_in_collision(ctx.chain, ctx.geometry, base, &rec.config, ctx.world, &ignore)? {
                continue;
            }
            let mut witness = Witness {
                grasp_index,
                config: rec.config.clone(),
                stored_pose: rec.pose,
                target,
                refined: false,
            };
            if let Some(opts) = &options.refine {
                if let IkOutcome::Converged { config, .. } = refine_ik(ctx.chain, &rec.config, &target, opts)? {
                    if !robot_in_collision(ctx.chain, ctx.geometry, base, &config, ctx.world, &ignore)? {
                        witness.config = config;
                        witness.refined = true;
                    }
                }
            }
            return Ok(Some(witness));
        }
    }
    Ok(None)
}

/// Feasible base positions for one tray.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRegion {
    pub tray: String,
    pub grid: BaseGridSpec,
    pub mask: Mask,
}

/// Per-cell witnesses, one per object, for feasible cells.
pub type CellWitnesses = Vec<Option<Vec<Witness>>>;

pub fn compute_base_region(
    ctx: &RobotContext,
    tray: &str,
    graspsets: &[GraspSet],
    grid: &BaseGridSpec,
    options: &GraspOptions,
) -> Result<BaseRegion, RegionError> {
    compute_base_region_with_witnesses(ctx, tray, graspsets, grid, options).map(|(r, _)| r)
}

/// Like [`compute_base_region`], also returning the witness of every
/// object at every feasible cell (row-major).
pub fn compute_base_region_with_witnesses(
    ctx: &RobotContext,
    tray: &str,
    graspsets: &[GraspSet],
    grid: &BaseGridSpec,
    options: &GraspOptions,
) -> Result<(BaseRegion, CellWitnesses), RegionError> {
    if graspsets.is_empty() {
        return Err(RegionError::NoObjects);
    }
    if let Some(g) = graspsets.iter().find(|g| g.grasps.is_empty()) {
        return Err(RegionError::EmptyGraspSet(g.object_id.clone()));
    }
    let cells: Vec<Result<Option<Vec<Witness>>, RegionError>> = (0..grid.width * grid.height)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / grid.width, i % grid.width);
            let [x, y] = grid.cell_center(row, col);
            let base = BasePose::new(x, y, grid.phi);
            if base_in_collision(ctx.geometry, &base, ctx.world) {
                return Ok(None);
            }
            let mut witnesses = Vec::with_capacity(graspsets.len());
            for gs in graspsets {
                match object_graspable(ctx, gs, &base, options)? {
                    Some(w) => witnesses.push(w),
                    None => return Ok(None),
                }
            }
            Ok(Some(witnesses))
        })
        .collect();
    let mut mask = Mask::new(grid.width, grid.height);
    let mut out = Vec::with_capacity(cells.len());
    for (i, cell) in cells.into_iter().enumerate() {
        let cell = cell?;
        if cell.is_some() {
            mask.set(i / grid.width, i % grid.width, true);
        }
        out.push(cell);
    }
    Ok((
        BaseRegion {
            tray: tray.to_string(),
            grid: *grid,
            mask,
        },
        out,
    ))
}

impl BaseRegion {
    /// Text grid: a `baseregion v1` header then one `#`/`.` line per row,
    /// row 0 (lowest y) first.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "baseregion v1 {} {} {} {} {} {} {}\n",
            self.tray, g.origin[0], g.origin[1], g.cell, g.width, g.height, g.phi
        );
        for row in self.mask.to_rows() {
            let _ = writeln!(s, "{row}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, RegionError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| RegionError::Parse("empty file".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 9 || f[0] != "baseregion" || f[1] != "v1" {
            return Err(RegionError::Parse(format!("bad header {header:?}")));
        }
        let (grid, tray) = parse_grid_fields(&f[2..])?;
        let rows: Vec<&str> = lines.take(grid.height).collect();
        let mask = parse_rows(&rows, &grid)?;
        Ok(Self { tray, grid, mask })
    }
}

/// `<id> <x0> <y0> <c> <w> <h> <phi>`.
pub(crate) fn parse_grid_fields(f: &[&str]) -> Result<(BaseGridSpec, String), RegionError> {
    let num = |i: usize| -> Result<f64, RegionError> {
        f[i].parse::<f64>()
            .map_err(|_| RegionError::Parse(format!("bad number {:?}", f[i])))
    };
    let int = |i: usize| -> Result<usize, RegionError> {
        f[i].parse::<usize>()
            .map_err(|_| RegionError::Parse(format!("bad integer {:?}", f[i])))
    };
    let grid = BaseGridSpec::new([num(1)?, num(2)?], num(3)?, int(4)?, int(5)?, num(6)?)?;
    Ok((grid, f[0].to_string()))
}

pub(crate) fn parse_rows(rows: &[&str], grid: &BaseGridSpec) -> Result<Mask, RegionError> {
    if rows.len() != grid.height {
        return Err(RegionError::Parse(format!("expected {} rows, found {}", grid.height, rows.len())));
    }
    let mask = Mask::from_rows(rows).ok_or_else(|| RegionError::Parse("malformed grid rows".into()))?;
    if mask.width() != grid.width {
        return Err(RegionError::Parse(format!("expected width {}, found {}", grid.width, mask.width())));
    }
    Ok(mask)
}
