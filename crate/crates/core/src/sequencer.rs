//! Stop selection and ordering.
//!
//! Selection is a 0-1 program: pick the fewest candidate intersections whose
//! tray subsets cover every tray. It is solved by branch and bound. Despite
//! the usual "knapsack" label for this formulation, the constraints are
//! set-cover constraints, and that is what is solved here. The chosen stops
//! are then ordered into the shortest open path from start to goal, exactly
//! by enumeration for small counts and by simulated annealing otherwise.

use crate::baseregion::BaseRegion;
use crate::regiongeo::{enumerate_intersections, filter_by_uncertainty, IntersectionRecord, RegionGeoError, UncertaintyModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

/// Largest stop count ordered by exhaustive enumeration.
pub const EXACT_LIMIT: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequencerError {
    #[error("infeasible: no surviving candidate covers tray(s) {}", .trays.join(","))]
    Infeasible { trays: Vec<String> },
    #[error("{m} stops exceed the exact ordering limit of {limit}; use simulated annealing")]
    TooManyStops { m: usize, limit: usize },
    #[error("candidate {index} is invalid: {reason}")]
    InvalidCandidate { index: usize, reason: String },
    #[error(transparent)]
    Geo(#[from] RegionGeoError),
    #[error("plan file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Sorted tray indices this candidate serves.
    pub covers: Vec<usize>,
    pub position: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverInstance {
    trays: usize,
    candidates: Vec<Candidate>,
}

impl CoverInstance {
    pub fn new(trays: usize, mut candidates: Vec<Candidate>) -> Result<Self, SequencerError> {
        for (index, c) in candidates.iter_mut().enumerate() {
            c.covers.sort_unstable();
            c.covers.dedup();
            if c.covers.is_empty() {
                return Err(SequencerError::InvalidCandidate {
                    index,
                    reason: "covers no tray".into(),
                });
            }
            if let Some(&s) = c.covers.iter().find(|&&s| s >= trays) {
                return Err(SequencerError::InvalidCandidate {
                    index,
                    reason: format!("tray {s} out of range 0..{trays}"),
                });
            }
        }
        Ok(Self { trays, candidates })
    }

    /// Candidates given only by their tray subsets (positions at the origin).
    pub fn from_subsets(trays: usize, subsets: &[Vec<usize>]) -> Result<Self, SequencerError> {
        Self::new(
            trays,
            subsets
                .iter()
                .map(|s| Candidate {
                    covers: s.clone(),
                    position: [0.0, 0.0],
                    radius: 0.0,
                })
                .collect(),
        )
    }

    pub fn trays(&self) -> usize {
        self.trays
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// `a[s][i] = 1` iff candidate `i` covers tray `s`.
    pub fn coverage_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.trays)
            .map(|s| self.candidates.iter().map(|c| c.covers.contains(&s) as u8).collect())
            .collect()
    }

    /// Candidate indices ordered by descending subset size, then
    /// lexicographic subset, then index. Tie-breaking among optimal covers
    /// is lexicographic in this order.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.candidates.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ca, cb) = (&self.candidates[a].covers, &self.candidates[b].covers);
            cb.len().cmp(&ca.len()).then_with(|| ca.cmp(cb)).then(a.cmp(&b))
        });
        idx
    }

    fn uncovered(&self) -> Vec<usize> {
        let mut hit = vec![false; self.trays];
        for c in &self.candidates {
            for &s in &c.covers {
                hit[s] = true;
            }
        }
        (0..self.trays).filter(|&s| !hit[s]).collect()
    }
}

/// Preference among covers: fewer candidates, then exact covers, then the
/// lexicographically smallest sorted list of rank positions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoverKey {
    pub size: usize,
    pub inexact: bool,
    pub ranks: Vec<usize>,
}

impl CoverKey {
    /// Key of a selection given as rank positions; `None` if it does not cover.
    pub fn of(inst: &CoverInstance, rank: &[usize], ranks: &[usize]) -> Option<Self> {
        let mut count = vec![0usize; inst.trays];
        for &p in ranks {
            for &s in &inst.candidates[rank[p]].covers {
                count[s] += 1;
            }
        }
        if count.contains(&0) {
            return None;
        }
        let mut ranks = ranks.to_vec();
        ranks.sort_unstable();
        Some(Self {
            size: ranks.len(),
            inexact: count.iter().any(|&c| c != 1),
            ranks,
        })
    }
}

struct Search<'a> {
    inst: &'a CoverInstance,
    rank: Vec<usize>,
    /// per tray: rank positions of candidates covering it, ascending
    covering: Vec<Vec<usize>>,
    max_size: usize,
    count: Vec<usize>,
    chosen: Vec<usize>,
    best: Option<CoverKey>,
}

impl Search<'_> {
    fn run(&mut self) {
        let Some(s) = self.count.iter().position(|&c| c == 0) else {
            let key = CoverKey::of(self.inst, &self.rank, &self.chosen).expect("complete selection covers");
            if self.best.as_ref().is_none_or(|b| key < *b) {
                self.best = Some(key);
            }
            return;
        };
        let uncovered = self.count.iter().filter(|&&c| c == 0).count();
        let bound = self.chosen.len() + uncovered.div_ceil(self.max_size);
        if let Some(b) = &self.best {
            if bound > b.size {
                return;
            }
        }
        for k in 0..self.covering[s].len() {
            let p = self.covering[s][k];
            let cand = self.rank[p];
            self.chosen.push(p);
            for &t in &self.inst.candidates[cand].covers {
                self.count[t] += 1;
            }
            self.run();
            for &t in &self.inst.candidates[cand].covers {
                self.count[t] -= 1;
            }
            self.chosen.pop();
        }
    }
}

/// Minimum-cardinality cover by branch and bound. Returns candidate
/// indices in rank order (see [`CoverInstance::rank_order`]).
pub fn min_cover(inst: &CoverInstance) -> Result<Vec<usize>, SequencerError> {
    let missing = inst.uncovered();
    if !missing.is_empty() {
        return Err(SequencerError::Infeasible {
            trays: missing.iter().map(|s| s.to_string()).collect(),
        });
    }
    if inst.trays == 0 {
        return Ok(Vec::new());
    }
    let rank = inst.rank_order();
    let mut covering = vec![Vec::new(); inst.trays];
    for (p, &i) in rank.iter().enumerate() {
        for &s in &inst.candidates[i].covers {
            covering[s].push(p);
        }
    }
    let mut search = Search {
        inst,
        max_size: inst.candidates.iter().map(|c| c.covers.len()).max().unwrap_or(1),
        rank,
        covering,
        count: vec![0; inst.trays],
        chosen: Vec::new(),
        best: None,
    };
    search.run();
    let best = search.best.expect("a feasible instance has a cover");
    Ok(best.ranks.iter().map(|&p| search.rank[p]).collect())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Length of the open path `start -> stops[order[0]] -> ... -> goal`.
pub fn path_length(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]], order: &[usize]) -> f64 {
    let mut prev = start;
    let mut len = 0.0;
    for &i in order {
        len += dist(prev, stops[i]);
        prev = stops[i];
    }
    len + dist(prev, goal)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Shortest visiting order by enumerating permutations in lexicographic
/// order; later permutations replace the incumbent only when shorter by
/// more than 1e-12.
pub fn order_stops_exact(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]]) -> Result<Vec<usize>, SequencerError> {
    let m = stops.len();
    if m > EXACT_LIMIT {
        return Err(SequencerError::TooManyStops { m, limit: EXACT_LIMIT });
    }
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = perm.clone();
    let mut best_len = path_length(start, goal, stops, &perm);
    while next_permutation(&mut perm) {
        let len = path_length(start, goal, stops, &perm);
        if len < best_len - 1e-12 {
            best_len = len;
            best.clone_from(&perm);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaSchedule {
    /// Initial temperature; `None` uses the mean segment length of the
    /// greedy starting path.
    pub t0: Option<f64>,
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self {
            t0: None,
            alpha: 0.995,
            iterations: 20_000,
            seed: 42,
        }
    }
}

const REHEAT_FLOOR: f64 = 1e-3;

/// Nearest-neighbor order from `start`.
pub fn greedy_order(start: [f64; 2], stops: &[[f64; 2]]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..stops.len()).collect();
    let mut order = Vec::with_capacity(stops.len());
    let mut here = start;
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, dist(here, stops[i])))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let i = left.remove(k);
        order.push(i);
        here = stops[i];
    }
    order
}

/// Simulated annealing over visiting orders, from the greedy order, with
/// 2-opt reversals and single relocations mixed 4:1 and Metropolis
/// acceptance. Returns the best order seen.
///
/// Once geometric cooling brings the temperature below `REHEAT_FLOOR * T0`
/// the chain restarts from the best order at `T0`, so the iteration budget
/// is not spent on pure descent.
pub fn order_stops_sa(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]], schedule: &SaSchedule) -> Vec<usize> {
    let m = stops.len();
    let mut current = greedy_order(start, stops);
    if m < 2 {
        return current;
    }
    let mut cur_len = path_length(start, goal, stops, &current);
    let mut best = current.clone();
    let mut best_len = cur_len;
    let t0 = schedule.t0.unwrap_or(cur_len / (m + 1) as f64);
    let mut temp = t0;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut cand = current.clone();
    for _ in 0..schedule.iterations {
        cand.clone_from(&current);
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - 1);
        if j >= i {
            j += 1;
        }
        if rng.random_range(0..5) < 4 {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            cand[a..=b].reverse();
        } else {
            let v = cand.remove(i);
            cand.insert(j, v);
        }
        let len = path_length(start, goal, stops, &cand);
        let delta = len - cur_len;
        if delta <= 0.0 || rng.random::<f64>() < (-delta / temp.max(f64::MIN_POSITIVE)).exp() {
            std::mem::swap(&mut current, &mut cand);
            cur_len = len;
            if cur_len < best_len - 1e-12 {
                best_len = cur_len;
                best.clone_from(&current);
            }
        }
        temp *= schedule.alpha;
        if temp < REHEAT_FLOOR * t0 {
            temp = t0;
            current.clone_from(&best);
            cur_len = best_len;
        }
    }
    best
}

/// Independent annealing chains, one per seed; the shortest result wins,
/// earlier seeds on ties.
pub fn order_stops_sa_multi(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]], schedule: &SaSchedule, seeds: &[u64]) -> Vec<usize> {
    let runs: Vec<(f64, Vec<usize>)> = seeds
        .par_iter()
        .map(|&seed| {
            let order = order_stops_sa(start, goal, stops, &SaSchedule { seed, ..*schedule });
            (path_length(start, goal, stops, &order), order)
        })
        .collect();
    runs.into_iter()
        .fold(None, |best: Option<(f64, Vec<usize>)>, r| match best {
            Some(b) if b.0 <= r.0 => Some(b),
            _ => Some(r),
        })
        .map(|(_, o)| o)
        .unwrap_or_default()
}

/// Exact ordering up to [`EXACT_LIMIT`] stops, annealing above.
pub fn order_stops(start: [f64; 2], goal: [f64; 2], stops: &[[f64; 2]], schedule: &SaSchedule) -> Vec<usize> {
    if stops.len() <= EXACT_LIMIT {
        order_stops_exact(start, goal, stops).expect("within exact limit")
    } else {
        order_stops_sa(start, goal, stops, schedule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStop {
    /// Trays whose regions intersect at this stop.
    pub trays: Vec<String>,
    /// Trays this stop is responsible for (a subset of `trays`).
    pub assigned: Vec<String>,
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    /// Stops in visiting order.
    pub stops: Vec<PlanStop>,
    pub total_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanOptions {
    /// Largest intersection order considered; `None` = number of trays.
    pub lambda_max: Option<usize>,
    pub sa: SaSchedule,
}

impl PlanResult {
    pub fn waypoints(&self) -> Vec<[f64; 2]> {
        std::iter::once(self.start)
            .chain(self.stops.iter().map(|s| s.center))
            .chain(std::iter::once(self.goal))
            .collect()
    }

    /// Sum of the consecutive segment lengths.
    pub fn recomputed_length(&self) -> f64 {
        self.waypoints().windows(2).map(|w| dist(w[0], w[1])).sum()
    }

    /// Index of the stop serving `tray`.
    pub fn stop_for(&self, tray: &str) -> Option<usize> {
        self.stops.iter().position(|s| s.assigned.iter().any(|t| t == tray))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("plan v1\n");
        let _ = writeln!(s, "start {} {}", self.start[0], self.start[1]);
        let _ = writeln!(s, "goal {} {}", self.goal[0], self.goal[1]);
        for (k, stop) in self.stops.iter().enumerate() {
            let _ = writeln!(
                s,
                "stop {k} trays={} assigned={} center={},{} radius={}",
                stop.trays.join(","),
                stop.assigned.join(","),
                stop.center[0],
                stop.center[1],
                stop.radius
            );
        }
        let _ = writeln!(s, "length {}", self.total_length);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SequencerError> {
        let bad = |m: &str| SequencerError::Parse(m.to_string());
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("bad number {v:?}")));
        let pair = |v: &str| -> Result<[f64; 2], SequencerError> {
            let (a, b) = v.split_once(',').ok_or_else(|| bad(&format!("bad pair {v:?}")))?;
            Ok([num(a)?, num(b)?])
        };
        let mut lines = text.lines();
        if lines.next() != Some("plan v1") {
            return Err(bad("missing 'plan v1' header"));
        }
        let (mut start, mut goal, mut length) = (None, None, None);
        let mut stops = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.first().copied() {
                Some("start") if f.len() == 3 => start = Some([num(f[1])?, num(f[2])?]),
                Some("goal") if f.len() == 3 => goal = Some([num(f[1])?, num(f[2])?]),
                Some("length") if f.len() == 2 => length = Some(num(f[1])?),
                Some("stop") if f.len() == 6 => {
                    let field = |i: usize, key: &str| -> Result<&str, SequencerError> {
                        f[i].strip_prefix(key).ok_or_else(|| bad(&format!("expected {key} in {line:?}")))
                    };
                    let list = |v: &str| v.split(',').filter(|t| !t.is_empty()).map(String::from).collect();
                    stops.push(PlanStop {
                        trays: list(field(2, "trays=")?),
                        assigned: list(field(3, "assigned=")?),
                        center: pair(field(4, "center=")?)?,
                        radius: num(field(5, "radius=")?)?,
                    });
                }
                None => {}
                _ => return Err(bad(&format!("unrecognized line {line:?}"))),
            }
        }
        Ok(Self {
            start: start.ok_or_else(|| bad("missing start"))?,
            goal: goal.ok_or_else(|| bad("missing goal"))?,
            stops,
            total_length: length.ok_or_else(|| bad("missing length"))?,
        })
    }
}

fn order_into_plan(start: [f64; 2], goal: [f64; 2], stops: Vec<PlanStop>, sa: &SaSchedule) -> PlanResult {
    let centers: Vec<[f64; 2]> = stops.iter().map(|s| s.center).collect();
    let order = order_stops(start, goal, &centers, sa);
    let total_length = path_length(start, goal, &centers, &order);
    let mut slots: Vec<Option<PlanStop>> = stops.into_iter().map(Some).collect();
    PlanResult {
        start,
        goal,
        stops: order.iter().map(|&i| slots[i].take().unwrap()).collect(),
        total_length,
    }
}

/// Full selection pipeline: enumerate intersections, drop the ones whose
/// inscribed radius is below sigma, pick a minimum cover and order it.
pub fn plan(
    regions: &[BaseRegion],
    uncertainty: &UncertaintyModel,
    start: [f64; 2],
    goal: [f64; 2],
    options: &PlanOptions,
) -> Result<PlanResult, SequencerError> {
    let n = regions.len();
    let records = enumerate_intersections(regions, options.lambda_max.unwrap_or(n))?;
    let kept = filter_by_uncertainty(&records, uncertainty);
    plan_from_candidates(regions, &kept, start, goal, options)
}

/// Selection and ordering over already filtered intersection records.
pub fn plan_from_candidates(
    regions: &[BaseRegion],
    kept: &[IntersectionRecord],
    start: [f64; 2],
    goal: [f64; 2],
    options: &PlanOptions,
) -> Result<PlanResult, SequencerError> {
    let n = regions.len();
    let mut hit = vec![false; n];
    for r in kept {
        for &m in &r.members {
            hit[m] = true;
        }
    }
    let missing: Vec<String> = (0..n).filter(|&i| !hit[i]).map(|i| regions[i].tray.clone()).collect();
    if !missing.is_empty() {
        return Err(SequencerError::Infeasible { trays: missing });
    }
    let inst = CoverInstance::new(
        n,
        kept.iter()
            .map(|r| Candidate {
                covers: r.members.clone(),
                position: r.robust_center().expect("kept records are non-empty"),
                radius: r.inscribed_radius(),
            })
            .collect(),
    )?;
    let selected = min_cover(&inst)?;
    let mut served = vec![false; n];
    let stops: Vec<PlanStop> = selected
        .iter()
        .map(|&i| {
            let rec = &kept[i];
            let assigned = rec
                .members
                .iter()
                .filter(|&&m| !std::mem::replace(&mut served[m], true))
                .map(|&m| regions[m].tray.clone())
                .collect();
            PlanStop {
                trays: rec.trays.clone(),
                assigned,
                center: inst.candidates()[i].position,
                radius: inst.candidates()[i].radius,
            }
        })
        .collect();
    Ok(order_into_plan(start, goal, stops, &options.sa))
}

/// Baseline: one stop per tray at the center of its own region's inscribed
/// circle, ignoring intersections and the uncertainty filter.
pub fn naive_plan(regions: &[BaseRegion], start: [f64; 2], goal: [f64; 2], options: &PlanOptions) -> Result<PlanResult, SequencerError> {
    let mut stops = Vec::with_capacity(regions.len());
    let mut missing = Vec::new();
    for (i, r) in regions.iter().enumerate() {
        let rec = IntersectionRecord::from_mask(vec![i], vec![r.tray.clone()], r.grid, r.mask.clone());
        match rec.best() {
            Some(c) => stops.push(PlanStop {
                trays: vec![r.tray.clone()],
                assigned: vec![r.tray.clone()],
                center: c.circle.center,
                radius: c.circle.radius,
            }),
            None => missing.push(r.tray.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(SequencerError::Infeasible { trays: missing });
    }
    Ok(order_into_plan(start, goal, stops, &options.sa))
}
