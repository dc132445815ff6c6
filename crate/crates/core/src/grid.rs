//! Planar grids of candidate base positions and boolean masks over them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell size must be positive, got {0}")]
    BadCell(f64),
    #[error("grid extents must be positive, got {0}x{1}")]
    BadExtent(usize, usize),
    #[error("grids differ: {0}")]
    Mismatch(String),
}

/// Grid of base positions with a fixed base heading.
///
/// Cell `(row, col)` has its center at
/// `(x0 + (col + 0.5) * cell, y0 + (row + 0.5) * cell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseGridSpec {
    pub origin: [f64; 2],
    pub cell: f64,
    pub width: usize,
    pub height: usize,
    pub phi: f64,
}

impl BaseGridSpec {
    pub fn new(origin: [f64; 2], cell: f64, width: usize, height: usize, phi: f64) -> Result<Self, GridError> {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(GridError::BadCell(cell));
        }
        if width == 0 || height == 0 {
            return Err(GridError::BadExtent(width, height));
        }
        Ok(Self {
            origin,
            cell,
            width,
            height,
            phi,
        })
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell,
            self.origin[1] + (row as f64 + 0.5) * self.cell,
        ]
    }

    /// Cell containing the point, if it lies on the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.cell).floor();
        let r = ((y - self.origin[1]) / self.cell).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn ensure_same(&self, other: &BaseGridSpec) -> Result<(), GridError> {
        if self != other {
            return Err(GridError::Mismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Row-major boolean grid; `true` marks a feasible cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for r in 0..height {
            for c in 0..width {
                m.cells[r * width + c] = f(r, c);
            }
        }
        m
    }

    /// Parses rows of `#` (set) and `.` (clear); all rows must have equal length.
    pub fn from_rows(rows: &[&str]) -> Option<Self> {
        let height = rows.len();
        let width = rows.first()?.chars().count();
        let mut cells = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return None;
            }
            for ch in row.chars() {
                match ch {
                    '#' => cells.push(true),
                    '.' => cells.push(false),
                    _ => return None,
                }
            }
        }
        Some(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    /// Out-of-range cells read as clear.
    pub fn get_signed(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width && self.get(row as usize, col as usize)
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.cells[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|v| *v)
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert!(self.same_shape(other), "mask shapes differ");
        Mask {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a && *b).collect(),
        }
    }

    /// Every set cell of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.same_shape(other) && self.cells.iter().zip(&other.cells).all(|(a, b)| !*a || *b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| (i / self.width, i % self.width))
    }

    /// Rows as `#`/`.` strings, row 0 first.
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| if self.get(r, c) { '#' } else { '.' }).collect())
            .collect()
    }
}
