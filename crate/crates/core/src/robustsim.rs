//! Monte Carlo evaluation of a plan under base positioning error.

use crate::baseregion::BaseRegion;
use crate::regiongeo::{ErrorModel, UncertaintyModel};
use crate::sequencer::PlanResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no base region for tray {0}")]
    MissingRegion(String),
    #[error("trial count must be positive")]
    NoTrials,
    #[error("invalid time model: {0}")]
    BadTimeModel(String),
}

/// One planar offset drawn from the error model.
pub fn sample_offset<R: Rng + ?Sized>(model: ErrorModel, sigma: f64, rng: &mut R) -> [f64; 2] {
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    let r = match model {
        ErrorModel::UniformDisk => sigma * rng.random::<f64>().sqrt(),
        ErrorModel::GaussianRadial => {
            // per-axis sd sigma/sqrt(2) gives E[r^2] = sigma^2
            let n = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("finite sigma");
            let (dx, dy) = (n.sample(rng), n.sample(rng));
            return [dx, dy];
        }
        ErrorModel::BoundaryWorstCase => sigma,
    };
    [r * theta.cos(), r * theta.sin()]
}

/// Execution time: travel at constant speed plus a fixed cost per stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeModel {
    pub speed: f64,
    pub stop_overhead: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self {
            speed: 0.5,
            stop_overhead: 20.0,
        }
    }
}

impl TimeModel {
    pub fn new(speed: f64, stop_overhead: f64) -> Result<Self, SimError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(SimError::BadTimeModel(format!("speed {speed}")));
        }
        if !(stop_overhead.is_finite() && stop_overhead >= 0.0) {
            return Err(SimError::BadTimeModel(format!("stop overhead {stop_overhead}")));
        }
        Ok(Self { speed, stop_overhead })
    }

    pub fn time(&self, plan: &PlanResult) -> f64 {
        plan.total_length / self.speed + plan.stops.len() as f64 * self.stop_overhead
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub trials: usize,
    /// Shrinks the effective error radius by half a cell diagonal to
    /// account for grid quantization.
    pub quantization_slack: bool,
    pub time: TimeModel,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            quantization_slack: false,
            time: TimeModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopStats {
    pub assigned: Vec<String>,
    pub successes: usize,
    pub trials: usize,
}

impl StopStats {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStats {
    pub stops: usize,
    pub length: f64,
    pub time: f64,
    /// Fraction of trials where every stop succeeded.
    pub success_rate: f64,
    pub per_stop: Vec<StopStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub model: ErrorModel,
    pub sigma: f64,
    pub effective_sigma: f64,
    pub trials: usize,
    pub planned: PlanStats,
    pub naive: Option<PlanStats>,
}

impl SimReport {
    /// Planned over naive execution time.
    pub fn time_ratio(&self) -> Option<f64> {
        self.naive.as_ref().map(|n| self.planned.time / n.time)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("simulate v1\n");
        let _ = writeln!(
            s,
            "model {} sigma {} effective_sigma {} trials {}",
            self.model.name(),
            self.sigma,
            self.effective_sigma,
            self.trials
        );
        let mut block = |name: &str, p: &PlanStats| {
            let _ = writeln!(
                s,
                "{name} stops={} length={:.6} time={:.3} success_rate={:.4}",
                p.stops, p.length, p.time, p.success_rate
            );
            for (k, st) in p.per_stop.iter().enumerate() {
                let _ = writeln!(s, "{name}_stop {k} assigned={} rate={:.4}", st.assigned.join(","), st.rate());
            }
        };
        block("planned", &self.planned);
        if let Some(n) = &self.naive {
            block("naive", n);
        }
        if let Some(r) = self.time_ratio() {
            let _ = writeln!(s, "time_ratio {r:.4}");
        }
        s
    }
}

fn region_for<'a>(regions: &'a [BaseRegion], tray: &str) -> Result<&'a BaseRegion, SimError> {
    regions
        .iter()
        .find(|r| r.tray == tray)
        .ok_or_else(|| SimError::MissingRegion(tray.to_string()))
}

/// Whether a base at `p` lies in a feasible cell of the region.
pub fn feasible_at(region: &BaseRegion, p: [f64; 2]) -> bool {
    region.grid.cell_of(p[0], p[1]).is_some_and(|(r, c)| region.mask.get(r, c))
}

pub fn effective_sigma(u: &UncertaintyModel, cell: f64, quantization_slack: bool) -> f64 {
    if quantization_slack {
        (u.sigma - cell * std::f64::consts::SQRT_2 / 2.0).max(0.0)
    } else {
        u.sigma
    }
}

/// Perturbs every stop of the plan independently in each trial; a stop
/// succeeds when the perturbed base is feasible for all trays assigned to
/// it. Trial `t` draws from its own stream so results do not depend on
/// thread count.
pub fn evaluate_plan(
    plan: &PlanResult,
    regions: &[BaseRegion],
    u: &UncertaintyModel,
    options: &SimOptions,
) -> Result<(PlanStats, f64), SimError> {
    if options.trials == 0 {
        return Err(SimError::NoTrials);
    }
    let stop_regions: Vec<Vec<&BaseRegion>> = plan
        .stops
        .iter()
        .map(|s| s.assigned.iter().map(|t| region_for(regions, t)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let cell = regions.first().map_or(0.0, |r| r.grid.cell);
    let sigma = effective_sigma(u, cell, options.quantization_slack);
    let outcomes: Vec<Vec<bool>> = (0..options.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(u.seed);
            rng.set_stream(t as u64);
            plan.stops
                .iter()
                .zip(&stop_regions)
                .map(|(stop, regs)| {
                    let d = sample_offset(u.model, sigma, &mut rng);
                    let p = [stop.center[0] + d[0], stop.center[1] + d[1]];
                    regs.iter().all(|r| feasible_at(r, p))
                })
                .collect()
        })
        .collect();
    let per_stop = plan
        .stops
        .iter()
        .enumerate()
        .map(|(k, s)| StopStats {
            assigned: s.assigned.clone(),
            successes: outcomes.iter().filter(|o| o[k]).count(),
            trials: options.trials,
        })
        .collect();
    let all_ok = outcomes.iter().filter(|o| o.iter().all(|&b| b)).count();
    Ok((
        PlanStats {
            stops: plan.stops.len(),
            length: plan.total_length,
            time: options.time.time(plan),
            success_rate: all_ok as f64 / options.trials as f64,
            per_stop,
        },
        sigma,
    ))
}

/// Evaluates the plan and, if given, a baseline plan under the same model.
pub fn evaluate(
    plan: &PlanResult,
    naive: Option<&PlanResult>,
    regions: &[BaseRegion],
    u: &UncertaintyModel,
    options: &SimOptions,
) -> Result<SimReport, SimError> {
    let (planned, effective_sigma) = evaluate_plan(plan, regions, u, options)?;
    let naive = naive.map(|n| evaluate_plan(n, regions, u, options).map(|r| r.0)).transpose()?;
    Ok(SimReport {
        model: u.model,
        sigma: u.sigma,
        effective_sigma,
        trials: options.trials,
        planned,
        naive,
    })
}
