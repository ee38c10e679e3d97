//! Rhombic cell lattice `M Z^2` and observation regions.

use crate::geom::Point;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Lattice with basis columns `(ell, 0)` and `(ell/2, sqrt(3) ell / 2)`.
/// Cell `(k, l)` is the half-open rhombus `{p : M^-1 p - (k, l) in [-1/2, 1/2)^2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub ell: f64,
}

pub type CellIndex = (i64, i64);

impl CellGrid {
    pub fn new(ell: f64) -> Self {
        assert!(ell > 0.0 && ell.is_finite(), "cell side must be positive");
        CellGrid { ell }
    }

    /// `M (u, v)`.
    pub fn from_lattice(&self, u: f64, v: f64) -> Point {
        Point::new(self.ell * (u + 0.5 * v), self.ell * 0.5 * SQRT3 * v)
    }

    /// `M^-1 p`.
    pub fn to_lattice(&self, p: Point) -> (f64, f64) {
        let v = 2.0 * p.y / (SQRT3 * self.ell);
        let u = p.x / self.ell - 0.5 * v;
        (u, v)
    }

    pub fn center(&self, c: CellIndex) -> Point {
        self.from_lattice(c.0 as f64, c.1 as f64)
    }

    pub fn cell_of(&self, p: Point) -> CellIndex {
        let (u, v) = self.to_lattice(p);
        ((u + 0.5).floor() as i64, (v + 0.5).floor() as i64)
    }

    pub fn cell_area(&self) -> f64 {
        0.5 * SQRT3 * self.ell * self.ell
    }

    pub fn corners(&self, c: CellIndex) -> [Point; 4] {
        let (k, l) = (c.0 as f64, c.1 as f64);
        [
            self.from_lattice(k - 0.5, l - 0.5),
            self.from_lattice(k + 0.5, l - 0.5),
            self.from_lattice(k + 0.5, l + 0.5),
            self.from_lattice(k - 0.5, l + 0.5),
        ]
    }

    /// Cells whose closure might meet the axis-aligned box.
    fn cells_covering_box(&self, lo: Point, hi: Point) -> (CellIndex, CellIndex) {
        let cs = [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)].map(|p| self.to_lattice(p));
        let umin = cs.iter().map(|c| c.0).fold(f64::MAX, f64::min);
        let umax = cs.iter().map(|c| c.0).fold(f64::MIN, f64::max);
        let vmin = cs.iter().map(|c| c.1).fold(f64::MAX, f64::min);
        let vmax = cs.iter().map(|c| c.1).fold(f64::MIN, f64::max);
        (
            ((umin + 0.5).floor() as i64 - 1, (vmin + 0.5).floor() as i64 - 1),
            ((umax + 0.5).floor() as i64 + 1, (vmax + 0.5).floor() as i64 + 1),
        )
    }
}

/// Distance from `p` to a closed convex polygon (zero inside).
fn dist_to_convex(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut inside = true;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let (px, py) = (p.x - a.x, p.y - a.y);
        if ex * py - ey * px < 0.0 {
            inside = false;
        }
        let t = ((px * ex + py * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
        best = best.min(p.dist(Point::new(a.x + t * ex, a.y + t * ey)));
    }
    if inside {
        0.0
    } else {
        best
    }
}

/// A bounded observation window.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Union of lattice cells.
    Cells { grid: CellGrid, cells: BTreeSet<CellIndex> },
    /// Closed axis-aligned rectangle.
    Rect { min: Point, max: Point },
}

impl Region {
    /// Cells with `|k|, |l| <= n`.
    pub fn window(grid: CellGrid, n: i64) -> Self {
        let cells = (-n..=n).flat_map(|k| (-n..=n).map(move |l| (k, l))).collect();
        Region::Cells { grid, cells }
    }

    pub fn from_cells(grid: CellGrid, cells: impl IntoIterator<Item = CellIndex>) -> Self {
        Region::Cells { grid, cells: cells.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Cells { cells, .. } => cells.is_empty(),
            Region::Rect { min, max } => !(min.x <= max.x && min.y <= max.y),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Cells { grid, cells } => cells.len() as f64 * grid.cell_area(),
            Region::Rect { min, max } => ((max.x - min.x) * (max.y - min.y)).max(0.0),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Cells { grid, cells } => cells.contains(&grid.cell_of(p)),
            Region::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    pub fn contains_cell(&self, c: CellIndex) -> bool {
        match self {
            Region::Cells { cells, .. } => cells.contains(&c),
            Region::Rect { .. } => false,
        }
    }

    /// Whether the closed disk `B(center, radius)` meets the (closure of the) region.
    pub fn meets_closed_disk(&self, center: Point, radius: f64) -> bool {
        match self {
            Region::Rect { min, max } => {
                if self.is_empty() {
                    return false;
                }
                let dx = (min.x - center.x).max(0.0).max(center.x - max.x);
                let dy = (min.y - center.y).max(0.0).max(center.y - max.y);
                dx.hypot(dy) <= radius
            }
            Region::Cells { grid, cells } => {
                if cells.is_empty() {
                    return false;
                }
                let hit = |c: &CellIndex| dist_to_convex(center, &grid.corners(*c)) <= radius;
                if cells.contains(&grid.cell_of(center)) {
                    return true;
                }
                let lo = Point::new(center.x - radius, center.y - radius);
                let hi = Point::new(center.x + radius, center.y + radius);
                let (a, b) = grid.cells_covering_box(lo, hi);
                let span = ((b.0 - a.0 + 1) as f64) * ((b.1 - a.1 + 1) as f64);
                if span > cells.len() as f64 {
                    cells.iter().any(hit)
                } else {
                    (a.0..=b.0).any(|k| (a.1..=b.1).any(|l| cells.contains(&(k, l)) && hit(&(k, l))))
                }
            }
        }
    }

    pub fn grid(&self) -> Option<CellGrid> {
        match self {
            Region::Cells { grid, .. } => Some(*grid),
            Region::Rect { .. } => None,
        }
    }

    pub fn cells(&self) -> Option<&BTreeSet<CellIndex>> {
        match self {
            Region::Cells { cells, .. } => Some(cells),
            Region::Rect { .. } => None,
        }
    }
}
