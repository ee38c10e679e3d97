//! Background (hardcore) and type potentials and the marked Hamiltonian.

use crate::cells::Region;
use crate::delaunay::{CavityDiff, Triangulation, VertexId};
use crate::geom::{Point, TriangleMetrics};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mark label in `1..=q`.
pub type Mark = u16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("triangulation does not match configuration: {0}")]
    Mismatch(String),
    #[error("cavity diff is stale (diff revision {diff}, triangulation revision {current})")]
    StaleDiff { diff: u64, current: u64 },
}

fn default_gamma() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Activity per mark.
    pub z: f64,
    pub q: u16,
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub alpha0: f64,
    /// `false` switches the background potential off (Poisson reduction checks).
    #[serde(default = "default_true")]
    pub hardcore: bool,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), PotentialError> {
        let bad = |m: &str| Err(PotentialError::InvalidParams(m.to_string()));
        if !(self.z > 0.0 && self.z.is_finite()) {
            return bad("z must be positive");
        }
        if self.q < 1 {
            return bad("q must be at least 1");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.r > 0.0 && self.r < self.big_r && self.big_r.is_finite()) {
            return bad("need 0 < r < R < inf");
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < std::f64::consts::FRAC_PI_3) {
            return bad("alpha0 must lie in (0, pi/3)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub point: Point,
    pub mark: Mark,
    /// Boundary point (never touched by samplers).
    pub frozen: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkedConfiguration {
    pub points: Vec<MarkedPoint>,
}

impl MarkedConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(|m| m.point).collect()
    }

    pub fn check_marks(&self, q: u16) -> Result<(), PotentialError> {
        match self.points.iter().find(|m| m.mark < 1 || m.mark > q) {
            Some(m) => Err(PotentialError::InvalidParams(format!("mark {} outside 1..={q}", m.mark))),
            None => Ok(()),
        }
    }

    /// Checks that vertex `i` of `t` is point `i` of this configuration.
    pub fn check_matches(&self, t: &Triangulation) -> Result<(), PotentialError> {
        if t.num_vertices() != self.len() {
            return Err(PotentialError::Mismatch(format!(
                "{} vertices vs {} points",
                t.num_vertices(),
                self.len()
            )));
        }
        for (i, m) in self.points.iter().enumerate() {
            let v = VertexId(i as u32);
            if !t.contains_vertex(v) || t.point(v) != m.point {
                return Err(PotentialError::Mismatch(format!("vertex {i} differs")));
            }
        }
        Ok(())
    }
}

/// `true` when the background potential vanishes on the triangle.
pub fn psi_admissible(tm: &TriangleMetrics, p: &ModelParams) -> bool {
    !p.hardcore || (tm.circumradius > p.r && tm.circumradius < p.big_r && tm.min_angle > p.alpha0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    Zero,
    Infinite,
}

pub fn psi(tm: &TriangleMetrics, p: &ModelParams) -> Psi {
    if psi_admissible(tm, p) {
        Psi::Zero
    } else {
        Psi::Infinite
    }
}

/// Type potential: `log(1 + beta A^-gamma)`, i.e. `log((A + beta) / A)` when `gamma = 1`.
pub fn phi(area: f64, p: &ModelParams) -> Result<f64, PotentialError> {
    if !(area > 0.0) {
        return Err(PotentialError::NonPositiveArea(area));
    }
    Ok(phi_unchecked(area, p.beta, p.gamma))
}

pub(crate) fn phi_unchecked(area: f64, beta: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        (beta / area).ln_1p()
    } else {
        (beta * area.powf(-gamma)).ln_1p()
    }
}

/// Hamiltonian value split into its finite part and the number of
/// triangles carrying an infinite background potential.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energy {
    pub finite: f64,
    pub violations: usize,
}

impl Energy {
    pub fn admissible(&self) -> bool {
        self.violations == 0
    }

    /// `None` stands for `+inf`.
    pub fn value(&self) -> Option<f64> {
        self.admissible().then_some(self.finite)
    }

    pub fn apply(&self, d: &EnergyDelta) -> Energy {
        Energy {
            finite: self.finite + d.finite,
            violations: (self.violations as i64 + d.violations) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyDelta {
    pub finite: f64,
    pub violations: i64,
}

impl std::ops::Add for EnergyDelta {
    type Output = EnergyDelta;
    fn add(self, o: EnergyDelta) -> EnergyDelta {
        EnergyDelta { finite: self.finite + o.finite, violations: self.violations + o.violations }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    Finite(f64),
    FiniteToInfinite,
    InfiniteToFinite,
    InfiniteToInfinite,
}

impl EnergyDelta {
    pub fn transition(&self, before: Energy) -> Transition {
        let after = before.apply(self);
        match (before.admissible(), after.admissible()) {
            (true, true) => Transition::Finite(self.finite),
            (true, false) => Transition::FiniteToInfinite,
            (false, true) => Transition::InfiniteToFinite,
            (false, false) => Transition::InfiniteToInfinite,
        }
    }
}

/// Contribution of one triangle, or `None` if its closed circumdisk misses the region.
pub fn triangle_energy(tm: &TriangleMetrics, marks: [Mark; 3], region: &Region, p: &ModelParams) -> Option<Energy> {
    if !region.meets_closed_disk(tm.circumcenter, tm.circumradius) {
        return None;
    }
    let mono = marks[0] == marks[1] && marks[1] == marks[2];
    Some(Energy {
        finite: if mono { 0.0 } else { phi_unchecked(tm.area, p.beta, p.gamma) },
        violations: usize::from(!psi_admissible(tm, p)),
    })
}

/// Full Hamiltonian over the triangles whose closed circumdisk meets `region`.
pub fn hamiltonian_with(
    t: &Triangulation,
    mark_of: impl Fn(VertexId) -> Mark,
    region: &Region,
    p: &ModelParams,
) -> Energy {
    let mut e = Energy::default();
    for id in t.triangle_ids() {
        let tm = t.triangle_metrics(id);
        let marks = t.triangle_vertices(id).map(&mark_of);
        if let Some(c) = triangle_energy(&tm, marks, region, p) {
            e.finite += c.finite;
            e.violations += c.violations;
        }
    }
    e
}

/// Full Hamiltonian; `t` must be `Triangulation::build(&cfg.positions())`.
pub fn hamiltonian(
    cfg: &MarkedConfiguration,
    t: &Triangulation,
    region: &Region,
    p: &ModelParams,
) -> Result<Energy, PotentialError> {
    cfg.check_matches(t)?;
    Ok(hamiltonian_with(t, |v| cfg.points[v.0 as usize].mark, region, p))
}

/// `H(after) - H(before)` from the triangles a diff created and destroyed.
/// `mark_of` must still answer for a vertex that was just removed.
pub fn delta_hamiltonian(
    t: &Triangulation,
    diff: &CavityDiff,
    mark_of: impl Fn(VertexId) -> Mark,
    region: &Region,
    p: &ModelParams,
) -> Result<EnergyDelta, PotentialError> {
    if diff.revision != t.revision() {
        return Err(PotentialError::StaleDiff { diff: diff.revision, current: t.revision() });
    }
    let mut d = EnergyDelta::default();
    for r in &diff.created {
        if let Some(c) = triangle_energy(&r.metrics, r.vertices.map(&mark_of), region, p) {
            d.finite += c.finite;
            d.violations += c.violations as i64;
        }
    }
    for r in &diff.destroyed {
        if let Some(c) = triangle_energy(&r.metrics, r.vertices.map(&mark_of), region, p) {
            d.finite -= c.finite;
            d.violations -= c.violations as i64;
        }
    }
    Ok(d)
}

/// Insertion variant: `cfg` is the configuration before the insertion and
/// the new vertex carries `mark`.
pub fn delta_hamiltonian_insert(
    cfg: &MarkedConfiguration,
    t: &Triangulation,
    diff: &CavityDiff,
    mark: Mark,
    region: &Region,
    p: &ModelParams,
) -> Result<EnergyDelta, PotentialError> {
    if t.num_vertices() != cfg.len() + 1 {
        return Err(PotentialError::Mismatch("expected exactly one inserted vertex".into()));
    }
    let mark_of = |v: VertexId| if v == diff.vertex { mark } else { cfg.points[v.0 as usize].mark };
    delta_hamiltonian(t, diff, mark_of, region, p)
}
