//! Pseudo-periodic configurations: one point per rhombic cell, uniform in the
//! ball of radius `rho * ell` around the cell centre.

use crate::cells::{CellGrid, CellIndex};
use crate::delaunay::{Triangulation, VertexId};
use crate::geom::Point;
use crate::potentials::{psi_admissible, MarkedConfiguration, MarkedPoint, ModelParams};
use crate::rng::cell_stream;
use crate::thresholds::{hardcore_ell_window, l_of_rho, rho0, u_of_rho};
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudoError {
    #[error("rho must lie in (0, 1/6), got {0}")]
    Rho(f64),
    #[error("triangulation failed: {0}")]
    Triangulation(#[from] crate::delaunay::DelaunayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoPeriodicSpec {
    pub grid: CellGrid,
    pub rho: f64,
}

impl PseudoPeriodicSpec {
    pub fn new(ell: f64, rho: f64) -> Result<Self, PseudoError> {
        if !(rho > 0.0 && rho < 1.0 / 6.0) {
            return Err(PseudoError::Rho(rho));
        }
        Ok(PseudoPeriodicSpec { grid: CellGrid::new(ell), rho })
    }
}

pub fn cell_of(grid: &CellGrid, p: Point) -> CellIndex {
    grid.cell_of(p)
}

/// The point of cell `(k, l)`; depends only on `(seed, k, l)`.
pub fn cell_point(spec: &PseudoPeriodicSpec, seed: u64, c: CellIndex) -> Point {
    let mut rng = cell_stream(seed, c.0, c.1);
    let center = spec.grid.center(c);
    let rmax = spec.rho * spec.grid.ell;
    loop {
        let rad = rmax * rng.random::<f64>().sqrt();
        let th = 2.0 * PI * rng.random::<f64>();
        let p = Point::new(center.x + rad * th.cos(), center.y + rad * th.sin());
        if p.dist(center) < rmax {
            return p;
        }
    }
}

/// One frozen, mark-1 point per requested cell, in the order given.
pub fn generate(spec: &PseudoPeriodicSpec, cells: impl IntoIterator<Item = CellIndex>, seed: u64) -> MarkedConfiguration {
    MarkedConfiguration {
        points: cells
            .into_iter()
            .map(|c| MarkedPoint { point: cell_point(spec, seed, c), mark: 1, frozen: true })
            .collect(),
    }
}

/// Cells `(k, l)` with `0 <= k < nk`, `0 <= l < nl`.
pub fn patch(nk: i64, nl: i64) -> Vec<CellIndex> {
    (0..nk).flat_map(|k| (0..nl).map(move |l| (k, l))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ViolationKind {
    CircumradiusOutsideHardcore,
    AngleBelowAlpha0,
    CircumradiusOutsideLattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardcoreViolation {
    pub kind: ViolationKind,
    pub vertices: [Point; 3],
    pub circumradius: f64,
    pub min_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardcoreReport {
    pub hypotheses_satisfied: bool,
    pub triangles_checked: usize,
    pub vertices_checked: usize,
    pub violations: Vec<HardcoreViolation>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub area_min: f64,
    pub area_max: f64,
    /// Triangles below `(ell^2 / 4) sqrt(3 (1 - 2 rho)(1 - 6 rho)^3)`.
    pub area_bound_violations: usize,
    /// Edges outside `(ell (1 - 2 rho), ell (1 + 2 rho))`.
    pub edge_length_violations: usize,
    /// Interior vertices without exactly six neighbours.
    pub degree_violations: usize,
}

impl HardcoreReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
            && self.area_bound_violations == 0
            && self.edge_length_violations == 0
            && self.degree_violations == 0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if !self.hypotheses_satisfied {
            s.push_str("status = hypotheses not satisfied\n");
        } else {
            s.push_str("status = hypotheses satisfied\n");
        }
        let rows: [(&str, String); 12] = [
            ("triangles_checked", self.triangles_checked.to_string()),
            ("vertices_checked", self.vertices_checked.to_string()),
            ("violations", self.violations.len().to_string()),
            ("area_bound_violations", self.area_bound_violations.to_string()),
            ("edge_length_violations", self.edge_length_violations.to_string()),
            ("degree_violations", self.degree_violations.to_string()),
            ("delta_min", format!("{:.17e}", self.delta_min)),
            ("delta_max", format!("{:.17e}", self.delta_max)),
            ("angle_min", format!("{:.17e}", self.angle_min)),
            ("angle_max", format!("{:.17e}", self.angle_max)),
            ("area_min", format!("{:.17e}", self.area_min)),
            ("area_max", format!("{:.17e}", self.area_max)),
        ];
        for (k, v) in rows {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// Checks the hardcore and lattice bounds on every triangle whose vertices
/// all sit at least two cells inside the generated patch.
pub fn verify_hardcore(
    cfg: &MarkedConfiguration,
    spec: &PseudoPeriodicSpec,
    p: &ModelParams,
) -> Result<HardcoreReport, PseudoError> {
    let grid = &spec.grid;
    let ell = grid.ell;
    let rho = spec.rho;
    let hyp = rho0(p.r, p.big_r, p.alpha0).is_ok_and(|r0| rho < r0)
        && hardcore_ell_window(p.r, p.big_r, rho).is_ok_and(|w| w.contains(ell));
    let (lo, hi) = (ell * l_of_rho(rho).unwrap(), ell * u_of_rho(rho).unwrap());
    let b = 1.0 - 6.0 * rho;
    let area_lb = 0.25 * ell * ell * (3.0 * (1.0 - 2.0 * rho) * b * b * b).sqrt();

    let pts = cfg.positions();
    let t = Triangulation::build(&pts)?;
    let cells: Vec<CellIndex> = pts.iter().map(|&q| grid.cell_of(q)).collect();
    let present: BTreeSet<CellIndex> = cells.iter().copied().collect();
    let interior_cell = |c: CellIndex| {
        (-2..=2).all(|dk| (-2..=2).all(|dl| present.contains(&(c.0 + dk, c.1 + dl))))
    };
    let interior: HashMap<VertexId, bool> =
        t.vertex_ids().map(|v| (v, interior_cell(cells[v.0 as usize]))).collect();

    let mut rep = HardcoreReport {
        hypotheses_satisfied: hyp,
        triangles_checked: 0,
        vertices_checked: 0,
        violations: Vec::new(),
        delta_min: f64::INFINITY,
        delta_max: f64::NEG_INFINITY,
        angle_min: f64::INFINITY,
        angle_max: f64::NEG_INFINITY,
        area_min: f64::INFINITY,
        area_max: f64::NEG_INFINITY,
        area_bound_violations: 0,
        edge_length_violations: 0,
        degree_violations: 0,
    };
    let hard = ModelParams { hardcore: true, ..*p };
    for id in t.triangle_ids() {
        let vs = t.triangle_vertices(id);
        if !vs.iter().all(|v| interior[v]) {
            continue;
        }
        rep.triangles_checked += 1;
        let m = t.triangle_metrics(id);
        rep.delta_min = rep.delta_min.min(m.circumradius);
        rep.delta_max = rep.delta_max.max(m.circumradius);
        rep.angle_min = rep.angle_min.min(m.min_angle);
        rep.angle_max = rep.angle_max.max(m.min_angle);
        rep.area_min = rep.area_min.min(m.area);
        rep.area_max = rep.area_max.max(m.area);
        let corners = vs.map(|v| t.point(v));
        let mut flag = |kind| {
            rep.violations.push(HardcoreViolation {
                kind,
                vertices: corners,
                circumradius: m.circumradius,
                min_angle: m.min_angle,
            })
        };
        if !(m.circumradius > p.r && m.circumradius < p.big_r) {
            flag(ViolationKind::CircumradiusOutsideHardcore);
        }
        if !(m.min_angle > p.alpha0) {
            flag(ViolationKind::AngleBelowAlpha0);
        }
        if !(lo <= m.circumradius && m.circumradius <= hi) {
            flag(ViolationKind::CircumradiusOutsideLattice);
        }
        debug_assert_eq!(
            psi_admissible(&m, &hard),
            m.circumradius > p.r && m.circumradius < p.big_r && m.min_angle > p.alpha0
        );
        if m.area < area_lb {
            rep.area_bound_violations += 1;
        }
        for k in 0..3 {
            let e = corners[k].dist(corners[(k + 1) % 3]);
            if !(e > ell * (1.0 - 2.0 * rho) && e < ell * (1.0 + 2.0 * rho)) {
                rep.edge_length_violations += 1;
            }
        }
    }
    for v in t.vertex_ids() {
        if interior[&v] {
            rep.vertices_checked += 1;
            if t.neighbors(v).len() != 6 {
                rep.degree_violations += 1;
            }
        }
    }
    Ok(rep)
}
