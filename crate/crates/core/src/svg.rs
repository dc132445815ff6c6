//! Plain SVG rendering of base grids, masks, circles, world footprints and
//! paths. Output is deterministic text; coordinates are printed with four
//! decimals.

use crate::collision::{GroupKind, Shape, World};
use crate::grid::{BaseGridSpec, Mask};
use std::fmt::Write as _;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Pixels per meter.
const SCALE: f64 = 400.0;

pub struct Canvas {
    grid: BaseGridSpec,
    body: String,
}

impl Canvas {
    pub fn new(grid: BaseGridSpec) -> Self {
        Self {
            grid,
            body: String::new(),
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let h = self.grid.height as f64 * self.grid.cell;
        ((x - self.grid.origin[0]) * SCALE, (h - (y - self.grid.origin[1])) * SCALE)
    }

    /// Filled cells of `mask`, colored by `layer`.
    pub fn mask(&mut self, mask: &Mask, layer: usize, opacity: f64) -> &mut Self {
        let color = PALETTE[layer % PALETTE.len()];
        let s = self.grid.cell * SCALE;
        let _ = writeln!(self.body, "<g fill=\"{color}\" fill-opacity=\"{opacity:.2}\">");
        for (r, c) in mask.iter_set() {
            let [x, y] = [
                self.grid.origin[0] + c as f64 * self.grid.cell,
                self.grid.origin[1] + (r + 1) as f64 * self.grid.cell,
            ];
            let (px, py) = self.px(x, y);
            let _ = writeln!(self.body, "<rect x=\"{px:.4}\" y=\"{py:.4}\" width=\"{s:.4}\" height=\"{s:.4}\"/>");
        }
        self.body.push_str("</g>\n");
        self
    }

    pub fn circle(&mut self, center: [f64; 2], radius: f64, label: &str) -> &mut Self {
        let (cx, cy) = self.px(center[0], center[1]);
        let _ = writeln!(
            self.body,
            "<circle cx=\"{cx:.4}\" cy=\"{cy:.4}\" r=\"{:.4}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
            radius * SCALE
        );
        let _ = writeln!(self.body, "<circle cx=\"{cx:.4}\" cy=\"{cy:.4}\" r=\"3\" fill=\"black\"/>");
        if !label.is_empty() {
            let _ = writeln!(
                self.body,
                "<text x=\"{:.4}\" y=\"{:.4}\" font-size=\"12\">{}</text>",
                cx + 5.0,
                cy - 5.0,
                escape(label)
            );
        }
        self
    }

    /// Top-down footprint of world shapes (bounding circles for spheres and
    /// capsules, rotated rectangles for boxes).
    pub fn world(&mut self, world: &World) -> &mut Self {
        for g in &world.groups {
            let (fill, stroke) = match g.kind {
                GroupKind::Tray => ("#dddddd", "#555555"),
                GroupKind::Object => ("#f4d03f", "#7d6608"),
                GroupKind::Obstacle => ("#555555", "#000000"),
            };
            let _ = writeln!(self.body, "<g fill=\"{fill}\" stroke=\"{stroke}\" fill-opacity=\"0.6\">");
            for s in &g.shapes {
                self.shape(s);
            }
            self.body.push_str("</g>\n");
        }
        self
    }

    fn shape(&mut self, s: &Shape) {
        match s {
            Shape::Sphere { center, radius } => {
                let (cx, cy) = self.px(center.x, center.y);
                let _ = writeln!(self.body, "<circle cx=\"{cx:.4}\" cy=\"{cy:.4}\" r=\"{:.4}\"/>", radius * SCALE);
            }
            Shape::Capsule { a, b, radius } => {
                let (ax, ay) = self.px(a.x, a.y);
                let (bx, by) = self.px(b.x, b.y);
                let _ = writeln!(
                    self.body,
                    "<line x1=\"{ax:.4}\" y1=\"{ay:.4}\" x2=\"{bx:.4}\" y2=\"{by:.4}\" stroke-width=\"{:.4}\" stroke-linecap=\"round\"/>",
                    2.0 * radius * SCALE
                );
            }
            Shape::Cuboid {
                center,
                half_extents,
                rotation,
            } => {
                let pts: Vec<String> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                    .iter()
                    .map(|(sx, sy)| {
                        let local = nalgebra::Vector3::new(sx * half_extents.x, sy * half_extents.y, 0.0);
                        let p = center + rotation * local;
                        let (x, y) = self.px(p.x, p.y);
                        format!("{x:.4},{y:.4}")
                    })
                    .collect();
                let _ = writeln!(self.body, "<polygon points=\"{}\"/>", pts.join(" "));
            }
        }
    }

    pub fn path(&mut self, points: &[[f64; 2]]) -> &mut Self {
        let pts: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = self.px(p[0], p[1]);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" stroke-dasharray=\"6,3\"/>",
            pts.join(" ")
        );
        self
    }

    pub fn finish(&self) -> String {
        let w = self.grid.width as f64 * self.grid.cell * SCALE;
        let h = self.grid.height as f64 * self.grid.cell * SCALE;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.4} {h:.4}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\" stroke=\"black\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
