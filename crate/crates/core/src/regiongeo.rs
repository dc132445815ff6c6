//! Region algebra: intersections of base regions, connected components,
//! inscribed circles and the positioning-uncertainty filter.

use crate::baseregion::BaseRegion;
use crate::grid::{BaseGridSpec, GridError, Mask};
use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionGeoError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("mask has no feasible cell")]
    EmptyMask,
    #[error("no regions given")]
    NoRegions,
    #[error("uncertainty level must be finite and non-negative, got {0}")]
    BadSigma(f64),
}

/// Distribution of the base positioning error used when sampling offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorModel {
    /// Uniform over the closed disk of radius sigma.
    UniformDisk,
    /// Isotropic normal, standard deviation sigma / sqrt(2) per axis.
    GaussianRadial,
    /// Uniform on the circle of radius sigma.
    #[default]
    BoundaryWorstCase,
}

impl ErrorModel {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::UniformDisk => "uniform",
            ErrorModel::GaussianRadial => "gaussian",
            ErrorModel::BoundaryWorstCase => "boundary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" | "uniform-disk" => Some(ErrorModel::UniformDisk),
            "gaussian" | "gaussian-radial" => Some(ErrorModel::GaussianRadial),
            "boundary" | "boundary-worst-case" => Some(ErrorModel::BoundaryWorstCase),
            _ => None,
        }
    }
}

/// Base positioning uncertainty. The filter threshold is `sigma` itself
/// under every error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyModel {
    pub sigma: f64,
    pub model: ErrorModel,
    pub seed: u64,
}

impl UncertaintyModel {
    pub fn new(sigma: f64, model: ErrorModel, seed: u64) -> Result<Self, RegionGeoError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(RegionGeoError::BadSigma(sigma));
        }
        Ok(Self { sigma, model, seed })
    }
}

/// Cell-wise AND of regions that share one grid.
pub fn intersect(regions: &[&BaseRegion]) -> Result<Mask, RegionGeoError> {
    let first = regions.first().ok_or(RegionGeoError::NoRegions)?;
    let mut mask = first.mask.clone();
    for r in &regions[1..] {
        first.grid.ensure_same(&r.grid)?;
        mask = mask.and(&r.mask);
    }
    Ok(mask)
}

/// 4-connected components, largest first; equal sizes ordered by their
/// first cell in row-major order.
pub fn connected_components(mask: &Mask) -> Vec<Mask> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![usize::MAX; w * h];
    let mut comps: Vec<(usize, usize, Mask)> = Vec::new();
    for start in 0..w * h {
        if label[start] != usize::MAX || !mask.get(start / w, start % w) {
            continue;
        }
        let id = comps.len();
        let mut m = Mask::new(w, h);
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            m.set(r, c, true);
            size += 1;
            let mut visit = |rr: usize, cc: usize| {
                let j = rr * w + cc;
                if label[j] == usize::MAX && mask.get(rr, cc) {
                    label[j] = id;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < h {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < w {
                visit(r, c + 1);
            }
        }
        comps.push((size, start, m));
    }
    comps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    comps.into_iter().map(|(_, _, m)| m).collect()
}

/// Squared distance, in cells, from every cell to the nearest clear cell
/// center, with everything outside the grid clear. Exact, via Meijster's
/// separable algorithm on integers.
pub fn squared_distance_transform(mask: &Mask) -> Vec<u64> {
    // pad by one clear ring so every row and column contains a clear cell
    let (w, h) = (mask.width() + 2, mask.height() + 2);
    let inside = |r: usize, c: usize| r >= 1 && c >= 1 && r < h - 1 && c < w - 1 && mask.get(r - 1, c - 1);

    // column pass: vertical distance to the nearest clear cell
    let mut g = vec![0i64; w * h];
    for c in 0..w {
        let mut d = 0i64;
        for r in 0..h {
            d = if inside(r, c) { d + 1 } else { 0 };
            g[r * w + c] = d;
        }
        for r in (0..h.saturating_sub(1)).rev() {
            let below = g[(r + 1) * w + c];
            if below + 1 < g[r * w + c] {
                g[r * w + c] = below + 1;
            }
        }
    }

    // row pass: lower envelope of parabolas
    let mut out = vec![0u64; mask.width() * mask.height()];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for r in 1..h - 1 {
        let gr = &g[r * w..(r + 1) * w];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + gr[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + gr[u].pow(2) - gr[i].pow(2)).div_euclid(2 * (uu - ii))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wsep = 1 + sep(s[q as usize], u);
                if wsep < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wsep;
                }
            }
        }
        for u in (0..w).rev() {
            let d = f(u as i64, s[q as usize]);
            if u >= 1 && u < w - 1 {
                out[(r - 1) * mask.width() + (u - 1)] = d as u64;
            }
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

/// Largest circle centered on a feasible cell center that reaches no
/// infeasible cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InscribedCircle {
    pub center: [f64; 2],
    pub radius: f64,
    pub cell: (usize, usize),
    /// Squared radius in cell units.
    pub squared_cells: u64,
}

/// Inscribed circle of the feasible cells of `mask`: the feasible cell
/// farthest from any infeasible or off-grid cell center. Ties go to the
/// lowest `(row, col)`.
pub fn inscribed_circle(mask: &Mask, grid: &BaseGridSpec) -> Result<InscribedCircle, RegionGeoError> {
    let dt = squared_distance_transform(mask);
    let mut best: Option<(u64, usize)> = None;
    for (i, &d) in dt.iter().enumerate() {
        if d > 0 && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, i));
        }
    }
    let (d2, i) = best.ok_or(RegionGeoError::EmptyMask)?;
    let cell = (i / mask.width(), i % mask.width());
    Ok(InscribedCircle {
        center: grid.cell_center(cell.0, cell.1),
        radius: (d2 as f64).sqrt() * grid.cell,
        cell,
        squared_cells: d2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mask: Mask,
    pub circle: InscribedCircle,
}

/// A non-empty intersection of the base regions of a set of trays.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionRecord {
    /// Sorted indices into the region list the record was built from.
    pub members: Vec<usize>,
    pub trays: Vec<String>,
    pub grid: BaseGridSpec,
    pub mask: Mask,
    pub components: Vec<Component>,
}

impl IntersectionRecord {
    pub fn from_mask(members: Vec<usize>, trays: Vec<String>, grid: BaseGridSpec, mask: Mask) -> Self {
        let components = connected_components(&mask)
            .into_iter()
            .map(|m| {
                let circle = inscribed_circle(&m, &grid).expect("components are non-empty");
                Component { mask: m, circle }
            })
            .collect();
        Self {
            members,
            trays,
            grid,
            mask,
            components,
        }
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    /// Component holding the largest inscribed circle (lowest cell on ties).
    pub fn best(&self) -> Option<&Component> {
        self.components.iter().fold(None, |best: Option<&Component>, c| match best {
            Some(b)
                if b.circle.squared_cells > c.circle.squared_cells
                    || (b.circle.squared_cells == c.circle.squared_cells && b.circle.cell <= c.circle.cell) =>
            {
                Some(b)
            }
            _ => Some(c),
        })
    }

    pub fn inscribed_radius(&self) -> f64 {
        self.best().map_or(0.0, |c| c.circle.radius)
    }

    /// Most robust base position: center of the best inscribed circle.
    pub fn robust_center(&self) -> Option<[f64; 2]> {
        self.best().map(|c| c.circle.center)
    }

    pub fn label(&self) -> String {
        self.trays.join(",")
    }

    /// Same grid format as base regions, with the tray subset in the header
    /// and one `circle` line per component.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "intersection v1 {} {} {} {} {} {} {}\n",
            self.label(),
            g.origin[0],
            g.origin[1],
            g.cell,
            g.width,
            g.height,
            g.phi
        );
        for row in self.mask.to_rows() {
            let _ = writeln!(s, "{row}");
        }
        for (k, c) in self.components.iter().enumerate() {
            let _ = writeln!(
                s,
                "circle {k} cells={} center={},{} radius={}",
                c.mask.count(),
                c.circle.center[0],
                c.circle.center[1],
                c.circle.radius
            );
        }
        s
    }
}

/// Every non-empty intersection of at most `lambda_max` regions, ordered by
/// subset size and then lexicographically. Supersets of an empty
/// intersection are never evaluated.
pub fn enumerate_intersections(
    regions: &[BaseRegion],
    lambda_max: usize,
) -> Result<Vec<IntersectionRecord>, RegionGeoError> {
    let first = regions.first().ok_or(RegionGeoError::NoRegions)?;
    for r in regions {
        first.grid.ensure_same(&r.grid)?;
    }
    let n = regions.len();
    let limit = lambda_max.min(n);
    let mut level: Vec<(Vec<usize>, Mask)> = (0..n)
        .filter(|&i| !regions[i].mask.is_empty())
        .map(|i| (vec![i], regions[i].mask.clone()))
        .collect();
    let mut out = Vec::new();
    let mut k = 1;
    while !level.is_empty() && k <= limit {
        let present: HashSet<Vec<usize>> = level.iter().map(|(s, _)| s.clone()).collect();
        let mut next = Vec::new();
        if k < limit {
            for (subset, mask) in &level {
                let last = *subset.last().unwrap();
                for j in last + 1..n {
                    let mut cand = subset.clone();
                    cand.push(j);
                    // every k-subset of the candidate must be non-empty
                    let all_present = (0..cand.len()).all(|drop| {
                        let sub: Vec<usize> = cand
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != drop)
                            .map(|(_, v)| *v)
                            .collect();
                        present.contains(&sub)
                    });
                    if !all_present {
                        continue;
                    }
                    let m = mask.and(&regions[j].mask);
                    if !m.is_empty() {
                        next.push((cand, m));
                    }
                }
            }
        }
        for (subset, mask) in level {
            let trays = subset.iter().map(|&i| regions[i].tray.clone()).collect();
            out.push(IntersectionRecord::from_mask(subset, trays, first.grid, mask));
        }
        level = next;
        k += 1;
    }
    Ok(out)
}

/// Keeps the records whose best inscribed radius is at least `sigma`.
pub fn filter_by_uncertainty(records: &[IntersectionRecord], u: &UncertaintyModel) -> Vec<IntersectionRecord> {
    records
        .iter()
        .filter(|r| r.inscribed_radius() >= u.sigma)
        .cloned()
        .collect()
}
