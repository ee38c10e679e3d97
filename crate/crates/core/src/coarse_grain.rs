//! Coarse graining of a marked configuration to a {0,1} field on cells.

use crate::cells::{CellGrid, CellIndex, Region};
use crate::delaunay::{Triangulation, VertexId};
use crate::geom::Point;
use crate::potentials::{Mark, MarkedConfiguration};
use crate::unionfind::UnionFind;
use serde::Serialize;
use std::collections::HashMap;

/// `(k, m, i, j)` with `i, j` in `0..8`; the cell centre lies in sub-cell `(4, 4)`.
pub type SubCell = (i64, i64, u8, u8);

pub fn subcell_of(grid: &CellGrid, p: Point) -> SubCell {
    let (k, m) = grid.cell_of(p);
    let (u, v) = grid.to_lattice(p);
    let idx = |f: f64| ((f * 8.0).floor() as i64 + 4).clamp(0, 7) as u8;
    (k, m, idx(u - k as f64), idx(v - m as f64))
}

/// Every one of the 64 sub-cells of `c` holds a point.
pub fn f_event(cfg: &MarkedConfiguration, grid: &CellGrid, c: CellIndex) -> bool {
    let mut seen = [[false; 8]; 8];
    for m in &cfg.points {
        let (k, l, i, j) = subcell_of(grid, m.point);
        if (k, l) == c {
            seen[i as usize][j as usize] = true;
        }
    }
    seen.iter().all(|r| r.iter().all(|&b| b))
}

/// Every point of `c` carries mark 1 (true for an empty cell).
pub fn o_event(cfg: &MarkedConfiguration, grid: &CellGrid, c: CellIndex) -> bool {
    cfg.points.iter().filter(|m| grid.cell_of(m.point) == c).all(|m| m.mark == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct CellStats {
    occupied: u64,
    all_one: bool,
}

fn cell_stats<'a>(grid: &CellGrid, pts: impl IntoIterator<Item = (Point, Mark)> + 'a) -> HashMap<CellIndex, CellStats> {
    let mut out: HashMap<CellIndex, CellStats> = HashMap::new();
    for (p, mark) in pts {
        let (k, l, i, j) = subcell_of(grid, p);
        let e = out.entry((k, l)).or_insert(CellStats { occupied: 0, all_one: true });
        e.occupied |= 1u64 << (8 * i + j);
        e.all_one &= mark == 1;
    }
    out
}

/// Field on the cells `|k|, |m| <= n + 1`: inside the window `|k|, |m| <= n`
/// a cell is open iff F and O hold, on the outer ring iff O holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoarseField {
    pub grid: CellGrid,
    pub n: i64,
    bits: Vec<bool>,
}

impl CoarseField {
    pub fn from_fn(grid: CellGrid, n: i64, f: impl Fn(CellIndex) -> bool) -> Self {
        let s = n + 1;
        let mut bits = Vec::with_capacity(((2 * s + 1) * (2 * s + 1)) as usize);
        for k in -s..=s {
            for m in -s..=s {
                bits.push(f((k, m)));
            }
        }
        CoarseField { grid, n, bits }
    }

    pub fn half_width(&self) -> i64 {
        self.n + 1
    }

    fn index(&self, c: CellIndex) -> Option<usize> {
        let s = self.half_width();
        (c.0.abs() <= s && c.1.abs() <= s).then(|| ((c.0 + s) * (2 * s + 1) + (c.1 + s)) as usize)
    }

    pub fn get(&self, c: CellIndex) -> Option<bool> {
        self.index(c).map(|i| self.bits[i])
    }

    pub fn in_window(&self, c: CellIndex) -> bool {
        c.0.abs() <= self.n && c.1.abs() <= self.n
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let s = self.half_width();
        (-s..=s).flat_map(move |k| (-s..=s).map(move |m| (k, m)))
    }

    pub fn window_region(&self) -> Region {
        Region::window(self.grid, self.n)
    }

    /// Rows of `0`/`1`, top row is the largest `m`; columns run over `k`.
    pub fn to_text(&self) -> String {
        let s = self.half_width();
        let mut out = String::new();
        for m in (-s..=s).rev() {
            for k in -s..=s {
                out.push(if self.get((k, m)).unwrap() { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_field(cfg: &MarkedConfiguration, grid: &CellGrid, n: i64) -> CoarseField {
    build_field_from(cfg.points.iter().map(|m| (m.point, m.mark)), grid, n)
}

pub fn build_field_from(pts: impl IntoIterator<Item = (Point, Mark)>, grid: &CellGrid, n: i64) -> CoarseField {
    let stats = cell_stats(grid, pts);
    CoarseField::from_fn(*grid, n, |c| {
        let s = stats.get(&c).copied();
        let o = s.is_none_or(|s| s.all_one);
        if c.0.abs() <= n && c.1.abs() <= n {
            o && s.is_some_and(|s| s.occupied == u64::MAX)
        } else {
            o
        }
    })
}

/// Components of the graph on mark-1 vertices joined by Delaunay edges.
pub struct MarkOneComponents {
    uf: UnionFind,
}

impl MarkOneComponents {
    pub fn new(tri: &Triangulation, mark_of: impl Fn(VertexId) -> Mark) -> Self {
        let mut uf = UnionFind::new(tri.vertex_capacity());
        for t in tri.triangle_ids() {
            let v = tri.triangle_vertices(t);
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                if mark_of(a) == 1 && mark_of(b) == 1 {
                    uf.union(a.0 as usize, b.0 as usize);
                }
            }
        }
        MarkOneComponents { uf }
    }

    pub fn connected(&mut self, a: VertexId, b: VertexId) -> bool {
        self.uf.same(a.0 as usize, b.0 as usize)
    }

    pub fn root(&mut self, a: VertexId) -> usize {
        self.uf.find(a.0 as usize)
    }
}

/// Number of mark-1 points in `delta` joined by a mark-1 path (consecutive
/// points sharing a triangle) to a point outside `lambda`.
pub fn delta_connected(
    tri: &Triangulation,
    mark_of: impl Fn(VertexId) -> Mark + Copy,
    delta: &Region,
    lambda: &Region,
) -> usize {
    let mut comps = MarkOneComponents::new(tri, mark_of);
    let mut outside = std::collections::HashSet::new();
    for v in tri.vertex_ids() {
        if mark_of(v) == 1 && !lambda.contains(tri.point(v)) {
            outside.insert(comps.root(v));
        }
    }
    tri.vertex_ids()
        .filter(|&v| mark_of(v) == 1 && delta.contains(tri.point(v)))
        .filter(|&v| outside.contains(&comps.root(v)))
        .count()
}

/// Adjacent open window cells whose centre owners are not joined by a mark-1 path.
pub fn path_consistency_check(
    tri: &Triangulation,
    mark_of: impl Fn(VertexId) -> Mark + Copy,
    field: &CoarseField,
) -> Vec<(CellIndex, CellIndex)> {
    let mut comps = MarkOneComponents::new(tri, mark_of);
    let mut owner: HashMap<CellIndex, VertexId> = HashMap::new();
    let mut own = |c: CellIndex| *owner.entry(c).or_insert_with(|| tri.voronoi_owner(field.grid.center(c)));
    let mut bad = Vec::new();
    for c in field.cells() {
        if !field.in_window(c) || field.get(c) != Some(true) {
            continue;
        }
        for d in [(c.0 + 1, c.1), (c.0, c.1 + 1)] {
            if !field.in_window(d) || field.get(d) != Some(true) {
                continue;
            }
            let (a, b) = (own(c), own(d));
            if mark_of(a) != 1 || mark_of(b) != 1 || !comps.connected(a, b) {
                bad.push((c, d));
            }
        }
    }
    bad
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellPercolation {
    pub open_cells: usize,
    pub clusters: usize,
    pub largest: usize,
    /// Window cells joined by open cells to the outer ring.
    pub reaching_complement: Vec<CellIndex>,
    pub origin_reaches_complement: bool,
}

/// 4-neighbour clusters of open cells.
pub fn cell_percolation(field: &CoarseField) -> CellPercolation {
    let s = field.half_width();
    let w = (2 * s + 1) as usize;
    let idx = |c: CellIndex| ((c.0 + s) as usize) * w + (c.1 + s) as usize;
    let mut uf = UnionFind::new(w * w + 1);
    let ring = w * w;
    let open = |c: CellIndex| field.get(c) == Some(true);
    for c in field.cells() {
        if !open(c) {
            continue;
        }
        if !field.in_window(c) {
            uf.union(idx(c), ring);
        }
        for d in [(c.0 + 1, c.1), (c.0, c.1 + 1)] {
            if open(d) {
                uf.union(idx(c), idx(d));
            }
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    let mut open_cells = 0;
    for c in field.cells().filter(|&c| open(c)) {
        open_cells += 1;
        *sizes.entry(uf.find(idx(c))).or_default() += 1;
    }
    let reaching: Vec<CellIndex> =
        field.cells().filter(|&c| field.in_window(c) && open(c) && uf.same(idx(c), ring)).collect();
    CellPercolation {
        open_cells,
        clusters: sizes.len(),
        largest: sizes.values().copied().max().unwrap_or(0),
        origin_reaches_complement: reaching.contains(&(0, 0)),
        reaching_complement: reaching,
    }
}

/// Window cells joined to the complement in the field for which no point of
/// the cell reaches outside the window by a mark-1 path.
pub fn soundness_check(
    tri: &Triangulation,
    mark_of: impl Fn(VertexId) -> Mark + Copy,
    field: &CoarseField,
) -> Vec<CellIndex> {
    let perc = cell_percolation(field);
    if perc.reaching_complement.is_empty() {
        return Vec::new();
    }
    let lambda = field.window_region();
    let mut comps = MarkOneComponents::new(tri, mark_of);
    let mut outside = std::collections::HashSet::new();
    let mut by_cell: HashMap<CellIndex, Vec<VertexId>> = HashMap::new();
    for v in tri.vertex_ids() {
        if mark_of(v) != 1 {
            continue;
        }
        let p = tri.point(v);
        if !lambda.contains(p) {
            outside.insert(comps.root(v));
        } else {
            by_cell.entry(field.grid.cell_of(p)).or_default().push(v);
        }
    }
    perc.reaching_complement
        .into_iter()
        .filter(|c| {
            !by_cell.get(c).is_some_and(|vs| vs.iter().any(|&v| outside.contains(&comps.root(v))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_is_subcell_four_four() {
        let g = CellGrid::new(1.7);
        assert_eq!(subcell_of(&g, g.center((3, -2))), (3, -2, 4, 4));
        assert_eq!(subcell_of(&g, Point::new(0.0, 0.0)), (0, 0, 4, 4));
        // Just below the lower-left corner of the centre sub-cell.
        let p = g.from_lattice(-1e-9, 0.01);
        assert_eq!(subcell_of(&g, p), (0, 0, 3, 4));
    }

    #[test]
    fn field_text_and_percolation() {
        let g = CellGrid::new(1.0);
        let all = CoarseField::from_fn(g, 1, |_| true);
        assert_eq!(all.to_text(), "11111\n".repeat(5));
        let p = cell_percolation(&all);
        assert_eq!(p.clusters, 1);
        assert!(p.origin_reaches_complement);
        let none = CoarseField::from_fn(g, 1, |c| c.0.abs() > 1 || c.1.abs() > 1);
        let p = cell_percolation(&none);
        assert!(p.reaching_complement.is_empty());
        assert_eq!(p.clusters, 1);
    }
}
