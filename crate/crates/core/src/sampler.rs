//! Grand-canonical Metropolis-Hastings chain for the marked model in a window
//! with a frozen, monochromatic boundary.

use crate::cells::{CellIndex, Region};
use crate::delaunay::{CavityDiff, DelaunayError, Triangulation, VertexId};
use crate::geom::Point;
use crate::potentials::{
    delta_hamiltonian, hamiltonian_with, phi_unchecked, Energy, EnergyDelta, Mark, MarkedConfiguration,
    MarkedPoint, ModelParams, PotentialError, Transition,
};
use crate::pseudo_periodic::{cell_point, PseudoPeriodicSpec};
use crate::rng::{substream, Rng as ChainRng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Params(#[from] PotentialError),
    #[error("boundary: {0}")]
    Boundary(String),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error("{0:?} is frozen")]
    Frozen(VertexId),
    #[error("{0:?} is not a vertex")]
    NotAVertex(VertexId),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Birth acceptance for `n` free points before the birth.
pub fn birth_acceptance(z: f64, q: u16, area: f64, n: usize, dh: f64) -> f64 {
    (z * f64::from(q) * area / (n as f64 + 1.0) * (-dh).exp()).min(1.0)
}

/// Death acceptance for `n` free points before the death.
pub fn death_acceptance(z: f64, q: u16, area: f64, n: usize, dh: f64) -> f64 {
    (n as f64 / (z * f64::from(q) * area) * (-dh).exp()).min(1.0)
}

/// Proposal mixture applied by one [`ChainState::sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    /// Birth, death and move proposals per sweep.
    pub geometric: usize,
    /// Fraction of geometric proposals that are moves; the rest split evenly.
    pub move_fraction: f64,
    /// Half-width of the square move displacement.
    pub move_step: f64,
    /// Systematic heat-bath passes over the free points.
    pub heatbath: usize,
    pub cluster: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { geometric: 100, move_fraction: 0.2, move_step: 0.25, heatbath: 1, cluster: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub sweep: u64,
    pub n: usize,
    /// `counts[i]` is the number of free points with mark `i + 1`.
    pub counts: Vec<usize>,
    pub energy: f64,
    /// `q N_1 - N`.
    pub dominance: i64,
}

impl ObservableRecord {
    /// `(q N_1 - N) / N`, zero for an empty window.
    pub fn dominance_ratio(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.dominance as f64 / self.n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalTri {
    pub v: [VertexId; 3],
    pub in_region: bool,
    pub phi: f64,
    pub p_open: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TriCache {
    pub revision: Option<u64>,
    pub tris: Vec<LocalTri>,
    /// Indices into `tris`, per vertex slot.
    pub incident: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub params: ModelParams,
    pub region: Region,
    pub(crate) tri: Triangulation,
    pub(crate) marks: Vec<Mark>,
    pub(crate) frozen: Vec<bool>,
    free: Vec<VertexId>,
    free_pos: Vec<usize>,
    pub(crate) energy: Energy,
    pub(crate) rng: ChainRng,
    pub sweep_count: u64,
    pub stats: MoveStats,
    accepted_since_check: u64,
    area: f64,
    cells: Vec<CellIndex>,
    pub(crate) cache: TriCache,
}

const NOT_FREE: usize = usize::MAX;

impl ChainState {
    /// `boundary` must be frozen, mark 1 and outside the window; `free` must lie
    /// inside it. The state must be admissible.
    pub fn init(
        params: ModelParams,
        region: Region,
        boundary: &MarkedConfiguration,
        free: &MarkedConfiguration,
        seed: u64,
        chain_id: u64,
    ) -> Result<Self, SamplerError> {
        params.validate()?;
        for m in &boundary.points {
            if !m.frozen || m.mark != 1 {
                return Err(SamplerError::Boundary("boundary points must be frozen with mark 1".into()));
            }
            if region.contains(m.point) {
                return Err(SamplerError::Boundary(format!("frozen point {:?} lies in the window", m.point)));
            }
        }
        free.check_marks(params.q)?;
        for m in &free.points {
            if m.frozen || !region.contains(m.point) {
                return Err(SamplerError::Boundary(format!("free point {:?} must be unfrozen and in the window", m.point)));
            }
        }
        let all: Vec<MarkedPoint> = boundary.points.iter().chain(free.points.iter()).copied().collect();
        let pts: Vec<Point> = all.iter().map(|m| m.point).collect();
        let mut tri = Triangulation::build(&pts)?;
        tri.set_record_exterior(false);
        if let Some(g) = region.grid() {
            tri.set_locate_scale(g.ell);
        }
        let cap = tri.vertex_capacity();
        let mut st = ChainState {
            params,
            area: region.area(),
            cells: region.cells().map(|c| c.iter().copied().collect()).unwrap_or_default(),
            region,
            tri,
            marks: all.iter().map(|m| m.mark).collect(),
            frozen: all.iter().map(|m| m.frozen).collect(),
            free: Vec::new(),
            free_pos: vec![NOT_FREE; cap],
            energy: Energy::default(),
            rng: substream(seed, &[0xC4A1, chain_id]),
            sweep_count: 0,
            stats: MoveStats::default(),
            accepted_since_check: 0,
            cache: TriCache::default(),
        };
        for (i, m) in all.iter().enumerate() {
            if !m.frozen {
                st.push_free(VertexId(i as u32));
            }
        }
        st.energy = st.full_energy();
        if !st.energy.admissible() {
            return Err(SamplerError::Boundary(format!(
                "initial state inadmissible ({} violating triangles)",
                st.energy.violations
            )));
        }
        Ok(st)
    }

    pub fn energy(&self) -> Energy {
        self.energy
    }

    pub fn admissible(&self) -> bool {
        self.energy.admissible()
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_vertices(&self) -> &[VertexId] {
        &self.free
    }

    pub fn mark(&self, v: VertexId) -> Mark {
        self.marks[v.0 as usize]
    }

    pub fn is_frozen(&self, v: VertexId) -> bool {
        self.frozen[v.0 as usize]
    }

    /// Frozen points first, then free ones, each in vertex order.
    pub fn configuration(&self) -> MarkedConfiguration {
        let mut ids: Vec<VertexId> = self.tri.vertex_ids().collect();
        ids.sort_by_key(|&v| (!self.is_frozen(v), v));
        MarkedConfiguration {
            points: ids
                .into_iter()
                .map(|v| MarkedPoint { point: self.tri.point(v), mark: self.mark(v), frozen: self.is_frozen(v) })
                .collect(),
        }
    }

    pub fn full_energy(&self) -> Energy {
        hamiltonian_with(&self.tri, |v| self.marks[v.0 as usize], &self.region, &self.params)
    }

    fn ensure_slot(&mut self, v: VertexId) {
        let need = v.0 as usize + 1;
        if self.marks.len() < need {
            self.marks.resize(need, 0);
            self.frozen.resize(need, false);
            self.free_pos.resize(need, NOT_FREE);
        }
    }

    fn push_free(&mut self, v: VertexId) {
        self.ensure_slot(v);
        self.free_pos[v.0 as usize] = self.free.len();
        self.free.push(v);
    }

    fn drop_free(&mut self, v: VertexId) {
        let i = self.free_pos[v.0 as usize];
        self.free.swap_remove(i);
        if i < self.free.len() {
            let w = self.free[i];
            self.free_pos[w.0 as usize] = i;
        }
        self.free_pos[v.0 as usize] = NOT_FREE;
    }

    fn delta(&self, d: &CavityDiff) -> EnergyDelta {
        delta_hamiltonian(&self.tri, d, |v| self.marks[v.0 as usize], &self.region, &self.params)
            .expect("diff is fresh")
    }

    fn sample_in_region(&mut self) -> Option<Point> {
        match &self.region {
            Region::Rect { min, max } => {
                if self.area <= 0.0 {
                    return None;
                }
                Some(Point::new(
                    self.rng.random_range(min.x..=max.x),
                    self.rng.random_range(min.y..=max.y),
                ))
            }
            Region::Cells { grid, .. } => {
                if self.cells.is_empty() {
                    return None;
                }
                let grid = *grid;
                loop {
                    let c = self.cells[self.rng.random_range(0..self.cells.len())];
                    let u = c.0 as f64 + self.rng.random::<f64>() - 0.5;
                    let v = c.1 as f64 + self.rng.random::<f64>() - 0.5;
                    let p = grid.from_lattice(u, v);
                    if self.region.contains(p) {
                        return Some(p);
                    }
                }
            }
        }
    }

    fn after_accept(&mut self) {
        self.accepted_since_check += 1;
        if self.accepted_since_check >= 1000 {
            self.accepted_since_check = 0;
            if let Err(e) = self.check_energy() {
                panic!("{e}");
            }
        }
    }

    /// Inserts a free point and returns its vertex with the energy change.
    fn insert_free(&mut self, p: Point, mark: Mark, key: Option<u64>) -> Result<(VertexId, EnergyDelta), DelaunayError> {
        let d = match key {
            Some(k) => self.tri.insert_with_key(p, k)?,
            None => self.tri.insert(p)?,
        };
        self.ensure_slot(d.vertex);
        self.marks[d.vertex.0 as usize] = mark;
        self.frozen[d.vertex.0 as usize] = false;
        Ok((d.vertex, self.delta(&d)))
    }

    fn remove_free(&mut self, v: VertexId) -> Result<EnergyDelta, DelaunayError> {
        let d = self.tri.remove(v)?;
        Ok(self.delta(&d))
    }

    pub fn step_birth(&mut self) -> bool {
        self.stats.proposed[0] += 1;
        let Some(p) = self.sample_in_region() else { return false };
        let mark = self.rng.random_range(1..=self.params.q);
        let n = self.free.len();
        let Ok((v, dh)) = self.insert_free(p, mark, None) else { return false };
        let u: f64 = self.rng.random();
        let ok = match dh.transition(self.energy) {
            Transition::Finite(x) => u < birth_acceptance(self.params.z, self.params.q, self.area, n, x),
            _ => false,
        };
        if ok {
            self.energy = self.energy.apply(&dh);
            self.push_free(v);
            self.stats.accepted[0] += 1;
            self.after_accept();
        } else {
            self.tri.remove(v).expect("undo birth");
        }
        ok
    }

    pub fn step_death(&mut self) -> bool {
        self.stats.proposed[1] += 1;
        let n = self.free.len();
        if n == 0 {
            return false;
        }
        let v = self.free[self.rng.random_range(0..n)];
        let (p, key, mark) = (self.tri.point(v), self.tri.key(v), self.mark(v));
        let Ok(dh) = self.remove_free(v) else { return false };
        let u: f64 = self.rng.random();
        let ok = match dh.transition(self.energy) {
            Transition::Finite(x) => u < death_acceptance(self.params.z, self.params.q, self.area, n, x),
            _ => false,
        };
        if ok {
            self.energy = self.energy.apply(&dh);
            self.drop_free(v);
            self.stats.accepted[1] += 1;
            self.after_accept();
        } else {
            let (w, _) = self.insert_free(p, mark, Some(key)).expect("undo death");
            self.relabel(v, w);
        }
        ok
    }

    /// Symmetric move: uniform displacement in a square of half-width `step`.
    pub fn step_move(&mut self, step: f64) -> bool {
        self.stats.proposed[2] += 1;
        let n = self.free.len();
        if n == 0 {
            return false;
        }
        let v = self.free[self.rng.random_range(0..n)];
        let (p, key, mark) = (self.tri.point(v), self.tri.key(v), self.mark(v));
        let np = Point::new(
            p.x + self.rng.random_range(-step..=step),
            p.y + self.rng.random_range(-step..=step),
        );
        let u: f64 = self.rng.random();
        if !self.region.contains(np) {
            return false;
        }
        let Ok(d1) = self.remove_free(v) else { return false };
        let (w, d2) = match self.insert_free(np, mark, Some(key)) {
            Ok(x) => x,
            Err(_) => {
                let (w, _) = self.insert_free(p, mark, Some(key)).expect("undo move");
                self.relabel(v, w);
                return false;
            }
        };
        let dh = d1 + d2;
        let ok = match dh.transition(self.energy) {
            Transition::Finite(x) => u < (-x).exp(),
            _ => false,
        };
        if ok {
            self.energy = self.energy.apply(&dh);
            self.relabel(v, w);
            self.stats.accepted[2] += 1;
            self.after_accept();
        } else {
            self.tri.remove(w).expect("undo move");
            let (w2, _) = self.insert_free(p, mark, Some(key)).expect("undo move");
            self.relabel(v, w2);
        }
        ok
    }

    /// Moves the free-list entry of `old` to `new` (slots can change on reinsertion).
    fn relabel(&mut self, old: VertexId, new: VertexId) {
        if old == new {
            return;
        }
        self.ensure_slot(new);
        let i = self.free_pos[old.0 as usize];
        self.free[i] = new;
        self.free_pos[new.0 as usize] = i;
        self.free_pos[old.0 as usize] = NOT_FREE;
        self.marks[new.0 as usize] = self.marks[old.0 as usize];
        self.frozen[new.0 as usize] = false;
    }

    /// Triangle table for the current triangulation.
    pub(crate) fn refresh_cache(&mut self) {
        if self.cache.revision == Some(self.tri.revision()) {
            return;
        }
        let cap = self.tri.vertex_capacity();
        let mut incident: Vec<Vec<u32>> = std::mem::take(&mut self.cache.incident);
        incident.iter_mut().for_each(Vec::clear);
        incident.resize(cap, Vec::new());
        let mut tris = Vec::with_capacity(self.tri.num_triangles());
        let p = &self.params;
        for id in self.tri.triangle_ids() {
            let m = self.tri.triangle_metrics(id);
            let v = self.tri.triangle_vertices(id);
            let in_region = self.region.meets_closed_disk(m.circumcenter, m.circumradius);
            let (phi, p_open) = if in_region {
                let f = phi_unchecked(m.area, p.beta, p.gamma);
                (f, -(-f).exp_m1())
            } else {
                (0.0, 1.0)
            };
            let k = tris.len() as u32;
            for w in v {
                incident[w.0 as usize].push(k);
            }
            tris.push(LocalTri { v, in_region, phi, p_open });
        }
        self.cache = TriCache { revision: Some(self.tri.revision()), tris, incident };
    }

    /// Mark-dependent energy of the triangles at `v` if `v` carried `m`.
    fn local_mark_energy(&self, v: VertexId, m: Mark) -> f64 {
        self.cache.incident[v.0 as usize]
            .iter()
            .map(|&k| &self.cache.tris[k as usize])
            .filter(|t| t.in_region)
            .map(|t| {
                let mono = t.v.iter().all(|&w| w == v || self.marks[w.0 as usize] == m);
                if mono {
                    0.0
                } else {
                    t.phi
                }
            })
            .sum()
    }

    /// Heat-bath weights of marks `1..=q` at `v`, normalised.
    pub fn heatbath_law(&mut self, v: VertexId) -> Result<Vec<f64>, SamplerError> {
        if !self.tri.contains_vertex(v) {
            return Err(SamplerError::NotAVertex(v));
        }
        if self.is_frozen(v) {
            return Err(SamplerError::Frozen(v));
        }
        self.refresh_cache();
        let e: Vec<f64> = (1..=self.params.q).map(|m| self.local_mark_energy(v, m)).collect();
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = e.iter().map(|x| (lo - x).exp()).collect();
        let s: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / s).collect())
    }

    pub fn step_mark_heatbath(&mut self, v: VertexId) -> Result<(), SamplerError> {
        let law = self.heatbath_law(v)?;
        let old = self.mark(v);
        let mut u: f64 = self.rng.random();
        let mut new = self.params.q;
        for (i, w) in law.iter().enumerate() {
            if u < *w {
                new = i as Mark + 1;
                break;
            }
            u -= w;
        }
        if new != old {
            let before = self.local_mark_energy(v, old);
            let after = self.local_mark_energy(v, new);
            self.marks[v.0 as usize] = new;
            self.energy.finite += after - before;
        }
        Ok(())
    }

    /// One systematic pass over the free points.
    pub fn heatbath_pass(&mut self) {
        for i in 0..self.free.len() {
            let v = self.free[i];
            self.step_mark_heatbath(v).expect("free vertex");
        }
    }

    pub fn record(&self) -> ObservableRecord {
        let q = self.params.q as usize;
        let mut counts = vec![0usize; q];
        for &v in &self.free {
            counts[self.mark(v) as usize - 1] += 1;
        }
        let n = self.free.len();
        ObservableRecord {
            sweep: self.sweep_count,
            n,
            counts: counts.clone(),
            energy: self.energy.finite,
            dominance: q as i64 * counts.first().copied().unwrap_or(0) as i64 - n as i64,
        }
    }

    pub fn sweep(&mut self, s: &Schedule) -> ObservableRecord {
        for _ in 0..s.geometric {
            let u: f64 = self.rng.random();
            if u < s.move_fraction {
                self.step_move(s.move_step);
            } else if u < s.move_fraction + 0.5 * (1.0 - s.move_fraction) {
                self.step_birth();
            } else {
                self.step_death();
            }
        }
        for _ in 0..s.heatbath {
            self.heatbath_pass();
        }
        for _ in 0..s.cluster {
            crate::random_cluster::cluster_sweep(self);
        }
        self.sweep_count += 1;
        self.record()
    }

    pub fn check_energy(&self) -> Result<(), SamplerError> {
        let full = self.full_energy();
        let tol = 1e-6 * full.finite.abs().max(1.0);
        if full.violations != self.energy.violations || (full.finite - self.energy.finite).abs() > tol {
            return Err(SamplerError::Invariant(format!(
                "incremental energy {:?} vs recomputed {:?}",
                self.energy, full
            )));
        }
        Ok(())
    }

    /// Energy bookkeeping, hardcore safety and minimum spacing on window triangles.
    pub fn check_invariants(&self) -> Result<(), SamplerError> {
        self.check_energy()?;
        let p = &self.params;
        let spacing = 2.0 * p.r * p.alpha0.sin();
        for id in self.tri.del3_region(&self.region) {
            let m = self.tri.triangle_metrics(id);
            if p.hardcore {
                if !(m.circumradius > p.r && m.circumradius < p.big_r && m.min_angle > p.alpha0) {
                    return Err(SamplerError::Invariant(format!("hardcore violated by {id:?}: {m:?}")));
                }
                let v = self.tri.triangle_vertices(id).map(|w| self.tri.point(w));
                for k in 0..3 {
                    let d = v[k].dist(v[(k + 1) % 3]);
                    if d <= spacing {
                        return Err(SamplerError::Invariant(format!("edge length {d} <= {spacing}")));
                    }
                }
            }
        }
        for &v in &self.free {
            if !self.region.contains(self.tri.point(v)) {
                return Err(SamplerError::Invariant(format!("free point {v:?} left the window")));
            }
        }
        Ok(())
    }

    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<(), SamplerError> {
        write_configuration_csv(&self.configuration(), w)
    }
}

pub fn write_configuration_csv(cfg: &MarkedConfiguration, w: &mut impl Write) -> Result<(), SamplerError> {
    writeln!(w, "x,y,mark,frozen")?;
    for m in &cfg.points {
        writeln!(w, "{:.17e},{:.17e},{},{}", m.point.x, m.point.y, m.mark, u8::from(m.frozen))?;
    }
    Ok(())
}

pub fn write_jsonl(records: &[ObservableRecord], w: &mut impl Write) -> Result<(), SamplerError> {
    for r in records {
        serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Frozen pseudo-periodic points on every cell within `4R` of the window, and
/// the pseudo-periodic points of the window cells with uniform random marks.
pub fn pseudo_periodic_setup(
    params: &ModelParams,
    spec: &PseudoPeriodicSpec,
    window: &Region,
    seed: u64,
) -> Result<(MarkedConfiguration, MarkedConfiguration), SamplerError> {
    let cells = window
        .cells()
        .ok_or_else(|| SamplerError::Boundary("pseudo-periodic setup needs a cell window".into()))?;
    let grid = spec.grid;
    let reach = 4.0 * params.big_r + 2.0 * grid.ell;
    let pad = (reach / (0.5 * 3f64.sqrt() * grid.ell)).ceil() as i64 + 1;
    let mut boundary = MarkedConfiguration::default();
    let mut free = MarkedConfiguration::default();
    let mut mark_rng = substream(seed, &[0x3A4B]);
    let (kmin, kmax) = cells.iter().fold((i64::MAX, i64::MIN), |a, c| (a.0.min(c.0), a.1.max(c.0)));
    let (lmin, lmax) = cells.iter().fold((i64::MAX, i64::MIN), |a, c| (a.0.min(c.1), a.1.max(c.1)));
    for k in kmin - 2 * pad..=kmax + 2 * pad {
        for l in lmin - pad..=lmax + pad {
            let c = (k, l);
            if cells.contains(&c) {
                continue;
            }
            let center = grid.center(c);
            if window.meets_closed_disk(center, 4.0 * params.big_r + grid.ell) {
                boundary.points.push(MarkedPoint { point: cell_point(spec, seed, c), mark: 1, frozen: true });
            }
        }
    }
    for &c in cells {
        let mark = mark_rng.random_range(1..=params.q);
        free.points.push(MarkedPoint { point: cell_point(spec, seed, c), mark, frozen: false });
    }
    Ok((boundary, free))
}
