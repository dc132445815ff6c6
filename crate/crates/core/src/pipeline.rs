//! End-to-end steps over a parsed scene, producing the same text artifacts
//! the command-line tool writes.

use crate::baseregion::{compute_base_region, BaseRegion, GraspOptions, RegionError, RobotContext};
use crate::kinematics::KinematicsError;
use crate::reachdb::{build_with_stats, BuildStats, DbError, ReachDb, SamplingSpec, VoxelSpec};
use crate::regiongeo::{enumerate_intersections, IntersectionRecord, RegionGeoError, UncertaintyModel};
use crate::robustsim::{evaluate, SimError, SimOptions, SimReport};
use crate::scene::Scene;
use crate::sequencer::{naive_plan, plan_from_candidates, PlanOptions, PlanResult, SequencerError};
use crate::svg::Canvas;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Geo(#[from] RegionGeoError),
    #[error(transparent)]
    Sequencer(#[from] SequencerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("tray {0} has no task in the scene")]
    UnknownTray(String),
}

/// Database resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DbParams {
    pub dtheta: f64,
    pub voxel: [f64; 6],
    pub w_min: f64,
}

pub fn build_scene_db(scene: &Scene, params: &DbParams) -> Result<(ReachDb, BuildStats), PipelineError> {
    let chain = scene.chain();
    let sampling = SamplingSpec::uniform(params.dtheta, chain.dof()).with_w_min(params.w_min);
    let spec = VoxelSpec::new(params.voxel)?;
    Ok(build_with_stats(&chain, &sampling, &spec)?)
}

/// Base regions of the given trays (all task trays when `trays` is empty),
/// in the order given.
pub fn scene_regions(scene: &Scene, db: &ReachDb, trays: &[String], options: &GraspOptions) -> Result<Vec<BaseRegion>, PipelineError> {
    let chain = scene.chain();
    let geometry = scene.geometry();
    let world = scene.world();
    let ctx = RobotContext::new(db, &chain, &geometry, &world)?;
    let trays = if trays.is_empty() { scene.task_trays() } else { trays.to_vec() };
    trays
        .iter()
        .map(|t| {
            let graspsets = scene.graspsets(t).ok_or_else(|| PipelineError::UnknownTray(t.clone()))?;
            Ok(compute_base_region(&ctx, t, &graspsets, &scene.base_grid, options)?)
        })
        .collect()
}

/// Regions reordered to the scene's task order; trays without a region
/// are an error.
pub fn regions_in_task_order(scene: &Scene, mut regions: Vec<BaseRegion>) -> Result<Vec<BaseRegion>, PipelineError> {
    let mut out = Vec::with_capacity(scene.tasks.len());
    for t in scene.task_trays() {
        let i = regions
            .iter()
            .position(|r| r.tray == t)
            .ok_or_else(|| PipelineError::Sim(SimError::MissingRegion(t.clone())))?;
        out.push(regions.swap_remove(i));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionAnalysis {
    pub records: Vec<IntersectionRecord>,
    /// Parallel to `records`: survived the uncertainty filter.
    pub kept: Vec<bool>,
    pub sigma: f64,
}

impl IntersectionAnalysis {
    pub fn new(regions: &[BaseRegion], u: &UncertaintyModel, lambda_max: Option<usize>) -> Result<Self, PipelineError> {
        let records = enumerate_intersections(regions, lambda_max.unwrap_or(regions.len()))?;
        let kept = records.iter().map(|r| r.inscribed_radius() >= u.sigma).collect();
        Ok(Self {
            records,
            kept,
            sigma: u.sigma,
        })
    }

    pub fn surviving(&self) -> Vec<IntersectionRecord> {
        self.records
            .iter()
            .zip(&self.kept)
            .filter(|(_, k)| **k)
            .map(|(r, _)| r.clone())
            .collect()
    }

    /// One line per record: subset, order, cells, radius, center, verdict.
    pub fn report(&self) -> String {
        let mut s = format!("filter v1 sigma {}\n", self.sigma);
        for (r, k) in self.records.iter().zip(&self.kept) {
            let c = r.robust_center().unwrap_or([f64::NAN, f64::NAN]);
            let _ = writeln!(
                s,
                "{} order={} cells={} radius={} center={},{} {}",
                r.label(),
                r.order(),
                r.mask.count(),
                r.inscribed_radius(),
                c[0],
                c[1],
                if *k { "kept" } else { "discarded" }
            );
        }
        s
    }

    /// All records, concatenated in enumeration order.
    pub fn records_text(&self) -> String {
        self.records.iter().map(IntersectionRecord::to_text).collect()
    }
}

pub fn plan_scene(scene: &Scene, regions: &[BaseRegion], u: &UncertaintyModel, options: &PlanOptions) -> Result<PlanResult, PipelineError> {
    let analysis = IntersectionAnalysis::new(regions, u, options.lambda_max)?;
    Ok(plan_from_candidates(regions, &analysis.surviving(), scene.start, scene.goal, options)?)
}

pub fn simulate_scene(
    scene: &Scene,
    regions: &[BaseRegion],
    plan: &PlanResult,
    u: &UncertaintyModel,
    options: &SimOptions,
) -> Result<SimReport, PipelineError> {
    let naive = naive_plan(regions, scene.start, scene.goal, &PlanOptions::default())?;
    Ok(evaluate(plan, Some(&naive), regions, u, options)?)
}

pub fn region_svg(scene: &Scene, region: &BaseRegion) -> String {
    let mut c = Canvas::new(region.grid);
    c.mask(&region.mask, 0, 0.45).world(&scene.world());
    c.finish()
}

pub fn intersections_svg(scene: &Scene, regions: &[BaseRegion], analysis: &IntersectionAnalysis) -> String {
    let mut c = Canvas::new(scene.base_grid);
    for (i, r) in regions.iter().enumerate() {
        c.mask(&r.mask, i, 0.25);
    }
    c.world(&scene.world());
    for (r, k) in analysis.records.iter().zip(&analysis.kept) {
        if r.order() >= 2 && *k {
            if let Some(best) = r.best() {
                c.circle(best.circle.center, best.circle.radius, &r.label());
            }
        }
    }
    c.finish()
}

pub fn plan_svg(scene: &Scene, regions: &[BaseRegion], plan: &PlanResult) -> String {
    let mut c = Canvas::new(scene.base_grid);
    for (i, r) in regions.iter().enumerate() {
        c.mask(&r.mask, i, 0.25);
    }
    c.world(&scene.world());
    for s in &plan.stops {
        c.circle(s.center, s.radius, &s.assigned.join(","));
    }
    c.path(&plan.waypoints());
    c.finish()
}

