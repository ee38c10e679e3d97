//! Incremental Delaunay triangulation with local cavity diffs.
//!
//! Hull edges are closed off with ghost triangles `(a, b, GHOST)` so that
//! insertion outside the hull and removal of hull vertices need no special
//! cases. Ghosts never leave this module: every public accessor reports real
//! triangles only.
//!
//! Ties (four cocircular points) are broken with [`in_circumball_sos`] using
//! per-vertex keys, so the triangulation is a function of the keyed point set
//! and does not depend on the insertion history.

use crate::cells::Region;
use crate::geom::{
    in_circumball_sos, orientation, triangle_metrics, Orientation, Point, TriangleMetrics,
};
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct TriId(pub u32);

pub const GHOST: VertexId = VertexId(u32::MAX);
const NONE: TriId = TriId(u32::MAX);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error("need at least three non-collinear points")]
    Degenerate,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point coincides with an existing vertex {0:?}")]
    DuplicatePoint(VertexId),
    #[error("{0:?} is not a vertex of the triangulation")]
    NotAVertex(VertexId),
    #[error("removal would leave fewer than three vertices or a collinear set")]
    TooFewVertices,
}

#[derive(Debug, Clone)]
struct Vertex {
    p: Point,
    key: u64,
    tri: TriId,
}

#[derive(Debug, Clone)]
struct Tri {
    v: [VertexId; 3],
    /// `n[i]` is across the edge opposite `v[i]`.
    n: [TriId; 3],
    metrics: Option<TriangleMetrics>,
    alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }

    fn index_of(&self, v: VertexId) -> Option<usize> {
        self.v.iter().position(|&w| w == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleRecord {
    pub id: TriId,
    pub vertices: [VertexId; 3],
    pub metrics: TriangleMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    Insert,
    Remove,
}

/// Local change produced by one insertion or removal.
///
/// `created` and `destroyed` hold real triangles only. `exterior` lists the
/// unchanged real triangles sharing an edge with the cavity boundary; it
/// stays empty when exterior recording is switched off.
#[derive(Debug, Clone)]
pub struct CavityDiff {
    pub kind: DiffKind,
    pub vertex: VertexId,
    pub point: Point,
    pub created: Vec<TriangleRecord>,
    pub destroyed: Vec<TriangleRecord>,
    pub exterior: Vec<TriangleRecord>,
    /// Triangulation revision right after this change.
    pub revision: u64,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    verts: Vec<Option<Vertex>>,
    free_verts: Vec<u32>,
    tris: Vec<Tri>,
    free_tris: Vec<u32>,
    n_verts: usize,
    n_real_tris: usize,
    next_key: u64,
    revision: u64,
    hint: TriId,
    grid: HashMap<(i64, i64), VertexId>,
    grid_h: f64,
    /// Topology only: no metrics, no diff records (hole filling).
    bare: bool,
    record_exterior: bool,
}

fn hilbert_d(n: u32, mut x: u32, mut y: u32) -> u64 {
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from((x & s) > 0);
        let ry = u32::from((y & s) > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

impl Triangulation {
    /// Builds the triangulation of `points`; vertex `i` gets id `VertexId(i)` and key `i`.
    pub fn build(points: &[Point]) -> Result<Self, DelaunayError> {
        let keys: Vec<u64> = (0..points.len() as u64).collect();
        Self::build_keyed(points, &keys)
    }

    /// Builds with explicit perturbation keys; vertex `i` gets id `VertexId(i)`.
    pub fn build_keyed(points: &[Point], keys: &[u64]) -> Result<Self, DelaunayError> {
        Self::build_inner(points, keys, false)
    }

    fn build_inner(points: &[Point], keys: &[u64], bare: bool) -> Result<Self, DelaunayError> {
        assert_eq!(points.len(), keys.len());
        if points.iter().any(|p| !p.is_finite()) {
            return Err(DelaunayError::NonFinite);
        }
        let n = points.len();
        if n < 3 {
            return Err(DelaunayError::Degenerate);
        }
        let i0 = 0;
        let i1 = (1..n).find(|&i| points[i] != points[i0]).ok_or(DelaunayError::Degenerate)?;
        let i2 = (1..n)
            .find(|&i| orientation(points[i0], points[i1], points[i]) != Orientation::Collinear)
            .ok_or(DelaunayError::Degenerate)?;

        let (mut minx, mut miny, mut maxx, mut maxy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            minx = minx.min(p.x);
            miny = miny.min(p.y);
            maxx = maxx.max(p.x);
            maxy = maxy.max(p.y);
        }
        let span = (maxx - minx).max(maxy - miny).max(f64::MIN_POSITIVE);
        let area = ((maxx - minx) * (maxy - miny)).max(span * span * 1e-6);
        let grid_h = (4.0 * area / n as f64).sqrt();

        let mut t = Triangulation {
            verts: vec![None; n],
            free_verts: Vec::new(),
            tris: Vec::with_capacity(2 * n + 8),
            free_tris: Vec::new(),
            n_verts: 0,
            n_real_tris: 0,
            next_key: keys.iter().copied().max().unwrap_or(0) + 1,
            revision: 0,
            hint: NONE,
            grid: HashMap::default(),
            grid_h,
            bare,
            record_exterior: !bare,
        };
        let (a, b, c) = if orientation(points[i0], points[i1], points[i2]) == Orientation::CounterClockwise {
            (i0, i1, i2)
        } else {
            (i0, i2, i1)
        };
        for &i in &[a, b, c] {
            t.verts[i] = Some(Vertex { p: points[i], key: keys[i], tri: NONE });
            t.n_verts += 1;
        }
        let (va, vb, vc) = (VertexId(a as u32), VertexId(b as u32), VertexId(c as u32));
        let t0 = t.alloc_tri([va, vb, vc]);
        let g0 = t.alloc_tri([vc, vb, GHOST]);
        let g1 = t.alloc_tri([va, vc, GHOST]);
        let g2 = t.alloc_tri([vb, va, GHOST]);
        t.tris[t0.0 as usize].n = [g0, g1, g2];
        // Ghost (x, y, G): n[0] across (y, G), n[1] across (G, x), n[2] across (x, y).
        t.tris[g0.0 as usize].n = [g2, g1, t0];
        t.tris[g1.0 as usize].n = [g0, g2, t0];
        t.tris[g2.0 as usize].n = [g1, g0, t0];
        for &v in &[va, vb, vc] {
            t.verts[v.0 as usize].as_mut().unwrap().tri = t0;
            t.grid_put(v);
        }
        t.hint = t0;

        // Insert the rest along a Hilbert curve so walks stay short.
        let mut rest: Vec<usize> = (0..n).filter(|&i| i != a && i != b && i != c).collect();
        let side = 1u32 << 16;
        let scale = (side - 1) as f64 / span;
        if !bare {
                rest.sort_by_key(|&i| {
                let hx = ((points[i].x - minx) * scale) as u32;
                let hy = ((points[i].y - miny) * scale) as u32;
                hilbert_d(side, hx.min(side - 1), hy.min(side - 1))
            });
        }
        for i in rest {
            t.insert_into_slot(points[i], keys[i], i as u32)?;
        }
        t.revision = 0;
        Ok(t)
    }

    pub fn num_vertices(&self) -> usize {
        self.n_verts
    }

    pub fn num_triangles(&self) -> usize {
        self.n_real_tris
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v != GHOST && self.verts.get(v.0 as usize).is_some_and(|s| s.is_some())
    }

    pub fn point(&self, v: VertexId) -> Point {
        self.vert(v).p
    }

    pub fn key(&self, v: VertexId) -> u64 {
        self.vert(v).key
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.verts
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| VertexId(i as u32))
    }

    /// Upper bound (exclusive) on vertex slot indices, for sizing side tables.
    pub fn vertex_capacity(&self) -> usize {
        self.verts.len()
    }

    pub fn triangle_ids(&self) -> impl Iterator<Item = TriId> + '_ {
        self.tris
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive && !t.is_ghost())
            .map(|(i, _)| TriId(i as u32))
    }

    pub fn triangle_vertices(&self, t: TriId) -> [VertexId; 3] {
        self.tris[t.0 as usize].v
    }

    pub fn triangle_metrics(&self, t: TriId) -> TriangleMetrics {
        self.tris[t.0 as usize].metrics.expect("ghost triangle has no metrics")
    }

    pub fn triangle_record(&self, t: TriId) -> TriangleRecord {
        TriangleRecord { id: t, vertices: self.triangle_vertices(t), metrics: self.triangle_metrics(t) }
    }

    /// Real triangles across the three edges (`None` on the hull).
    pub fn triangle_neighbors(&self, t: TriId) -> [Option<TriId>; 3] {
        let tri = &self.tris[t.0 as usize];
        tri.n.map(|u| if self.tris[u.0 as usize].is_ghost() { None } else { Some(u) })
    }

    /// Each real triangle as its sorted vertex-key triple. Independent of slot reuse.
    pub fn key_triangles(&self) -> Vec<[u64; 3]> {
        let mut out: Vec<[u64; 3]> = self
            .triangle_ids()
            .map(|t| {
                let mut k = self.triangle_vertices(t).map(|v| self.key(v));
                k.sort_unstable();
                k
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Real triangles incident to `v`, counter-clockwise.
    pub fn incident_triangles(&self, v: VertexId) -> Vec<TriId> {
        self.star(v).into_iter().filter(|&t| !self.tris[t.0 as usize].is_ghost()).collect()
    }

    /// Delaunay neighbours of `v`, counter-clockwise.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.star(v)
            .into_iter()
            .map(|t| {
                let tri = &self.tris[t.0 as usize];
                let i = tri.index_of(v).unwrap();
                tri.v[(i + 1) % 3]
            })
            .filter(|&w| w != GHOST)
            .collect()
    }

    pub fn is_hull_vertex(&self, v: VertexId) -> bool {
        self.star(v).iter().any(|&t| self.tris[t.0 as usize].is_ghost())
    }

    /// Real triangles whose closed circumdisk meets `region`.
    pub fn del3_region(&self, region: &Region) -> Vec<TriId> {
        self.triangle_ids()
            .filter(|&t| {
                let m = self.triangle_metrics(t);
                region.meets_closed_disk(m.circumcenter, m.circumradius)
            })
            .collect()
    }

    /// Nearest vertex to `p`; ties go to the smaller key.
    pub fn voronoi_owner(&self, p: Point) -> VertexId {
        let t = self.locate(p);
        let tri = &self.tris[t.0 as usize];
        let mut best = if tri.v[0] != GHOST { tri.v[0] } else { tri.v[1] };
        let better = |a: VertexId, b: VertexId| -> bool {
            let (da, db) = (self.point(a).dist2(p), self.point(b).dist2(p));
            da < db || (da == db && self.key(a) < self.key(b))
        };
        // Greedy descent reaches the nearest site on a Delaunay graph.
        loop {
            let mut moved = false;
            for w in self.neighbors(best) {
                if better(w, best) {
                    best = w;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        // Resolve exact ties among equidistant sites.
        let d0 = self.point(best).dist2(p);
        let mut seen = HashSet::from_iter([best]);
        let mut queue = VecDeque::from([best]);
        while let Some(u) = queue.pop_front() {
            for w in self.neighbors(u) {
                if self.point(w).dist2(p) == d0 && seen.insert(w) {
                    if self.key(w) < self.key(best) {
                        best = w;
                    }
                    queue.push_back(w);
                }
            }
        }
        best
    }

    /// Inserts `p` with a fresh key.
    pub fn insert(&mut self, p: Point) -> Result<CavityDiff, DelaunayError> {
        let key = self.next_key;
        self.insert_with_key(p, key)
    }

    /// Inserts `p` with a caller-chosen key (e.g. to undo a removal exactly).
    pub fn insert_with_key(&mut self, p: Point, key: u64) -> Result<CavityDiff, DelaunayError> {
        let slot = match self.free_verts.pop() {
            Some(s) => s,
            None => {
                self.verts.push(None);
                (self.verts.len() - 1) as u32
            }
        };
        match self.insert_into_slot(p, key, slot) {
            Ok(d) => Ok(d),
            Err(e) => {
                self.free_verts.push(slot);
                Err(e)
            }
        }
    }

    fn insert_into_slot(&mut self, p: Point, key: u64, slot: u32) -> Result<CavityDiff, DelaunayError> {
        if !p.is_finite() {
            return Err(DelaunayError::NonFinite);
        }
        let start = self.locate(p);
        {
            let tri = &self.tris[start.0 as usize];
            for &w in &tri.v {
                if w != GHOST && self.point(w) == p {
                    return Err(DelaunayError::DuplicatePoint(w));
                }
            }
        }
        let vid = VertexId(slot);
        self.verts[slot as usize] = Some(Vertex { p, key, tri: NONE });
        self.n_verts += 1;
        self.next_key = self.next_key.max(key + 1);

        // Cavity: every triangle whose (perturbed) circumdisk contains p.
        let mut cavity = Vec::with_capacity(16);
        cavity.push(start);
        // Cavities hold a handful of triangles; a linear scan is cheapest.
        let mut in_cavity: Vec<TriId> = Vec::with_capacity(16);
        in_cavity.push(start);
        let mut boundary: Vec<(VertexId, VertexId, TriId)> = Vec::with_capacity(16);
        let mut i = 0;
        while i < cavity.len() {
            let t = cavity[i];
            i += 1;
            let tri = self.tris[t.0 as usize].clone();
            for k in 0..3 {
                let u = tri.n[k];
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if in_cavity.contains(&u) {
                    continue;
                }
                if self.conflicts(u, p, key) {
                    in_cavity.push(u);
                    cavity.push(u);
                } else {
                    boundary.push((a, b, u));
                }
            }
        }
        // A neighbour examined before it joined the cavity may have left a stale boundary edge.
        boundary.retain(|(_, _, u)| !in_cavity.contains(u));

        let destroyed: Vec<TriangleRecord> = cavity
            .iter()
            .filter(|&&t| !self.bare && !self.tris[t.0 as usize].is_ghost())
            .map(|&t| self.triangle_record(t))
            .collect();
        let exterior: Vec<TriangleRecord> = boundary
            .iter()
            .filter(|(_, _, u)| self.record_exterior && !self.tris[u.0 as usize].is_ghost())
            .map(|&(_, _, u)| self.triangle_record(u))
            .collect();
        let exterior = dedup_records(exterior);
        for &t in &cavity {
            self.free_tri(t);
        }

        let mut new_tris = Vec::with_capacity(boundary.len());
        for &(a, b, outer) in &boundary {
            let v = if a == GHOST {
                [b, vid, GHOST]
            } else if b == GHOST {
                [vid, a, GHOST]
            } else {
                [a, b, vid]
            };
            let t = self.alloc_tri(v);
            new_tris.push(t);
            // Hook up the outer neighbour across (a, b).
            let o = &mut self.tris[outer.0 as usize];
            let k = (0..3)
                .find(|&k| {
                    let (x, y) = (o.v[(k + 1) % 3], o.v[(k + 2) % 3]);
                    x == b && y == a
                })
                .expect("outer triangle shares the boundary edge");
            o.n[k] = t;
            let nt = &mut self.tris[t.0 as usize];
            let k = (0..3)
                .find(|&k| nt.v[(k + 1) % 3] == a && nt.v[(k + 2) % 3] == b)
                .unwrap();
            nt.n[k] = outer;
        }
        self.stitch(&new_tris);
        for &t in &new_tris {
            for w in self.tris[t.0 as usize].v {
                if w != GHOST {
                    self.verts[w.0 as usize].as_mut().unwrap().tri = t;
                }
            }
        }
        let created: Vec<TriangleRecord> = new_tris
            .iter()
            .filter(|&&t| !self.bare && !self.tris[t.0 as usize].is_ghost())
            .map(|&t| self.triangle_record(t))
            .collect();
        self.hint = *new_tris
            .iter()
            .find(|&&t| !self.tris[t.0 as usize].is_ghost())
            .unwrap_or(&new_tris[0]);
        self.grid_put(vid);
        self.revision += 1;
        Ok(CavityDiff {
            kind: DiffKind::Insert,
            vertex: vid,
            point: p,
            created,
            destroyed,
            exterior,
            revision: self.revision,
        })
    }

    /// Removes `v` and retriangulates its star.
    pub fn remove(&mut self, v: VertexId) -> Result<CavityDiff, DelaunayError> {
        if !self.contains_vertex(v) {
            return Err(DelaunayError::NotAVertex(v));
        }
        if self.n_verts <= 3 {
            return Err(DelaunayError::TooFewVertices);
        }
        let star = self.star(v);
        // Link edges (a, b) with the hole on their left, plus the triangle beyond.
        let mut link: Vec<(VertexId, VertexId, TriId)> = Vec::with_capacity(star.len());
        for &t in &star {
            let tri = &self.tris[t.0 as usize];
            let i = tri.index_of(v).unwrap();
            link.push((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], tri.n[i]));
        }
        let ring: Vec<VertexId> = link.iter().map(|e| e.0).filter(|&w| w != GHOST).collect();
        let star_real = star.iter().filter(|&&t| !self.tris[t.0 as usize].is_ghost()).count();
        let collinear = ring.len() < 3 || {
            let (a, b) = (self.point(ring[0]), self.point(ring[1]));
            ring.iter().all(|&w| orientation(a, b, self.point(w)) == Orientation::Collinear)
        };
        if collinear && star_real == self.n_real_tris {
            return Err(DelaunayError::TooFewVertices);
        }

        // Replacement triangles as vertex triples.
        let new_v: Vec<[VertexId; 3]> = if collinear {
            link.iter()
                .filter(|(a, b, _)| *a != GHOST && *b != GHOST)
                .map(|&(a, b, _)| [a, b, GHOST])
                .collect()
        } else if link.iter().all(|e| e.0 != GHOST) {
            self.clip_ears(&link)
        } else {
            self.fill_hole(&ring, &link)
        };

        let p = self.point(v);
        let destroyed: Vec<TriangleRecord> = star
            .iter()
            .filter(|&&t| !self.tris[t.0 as usize].is_ghost())
            .map(|&t| self.triangle_record(t))
            .collect();
        let exterior: Vec<TriangleRecord> = link
            .iter()
            .filter(|(_, _, u)| self.record_exterior && !self.tris[u.0 as usize].is_ghost())
            .map(|&(_, _, u)| self.triangle_record(u))
            .collect();
        let exterior = dedup_records(exterior);
        for &t in &star {
            self.free_tri(t);
        }
        self.verts[v.0 as usize] = None;
        self.free_verts.push(v.0);
        self.n_verts -= 1;

        let mut new_tris = Vec::with_capacity(new_v.len());
        for vv in &new_v {
            let t = self.alloc_tri(*vv);
            new_tris.push(t);
            for k in 0..3 {
                let (a, b) = (vv[(k + 1) % 3], vv[(k + 2) % 3]);
                if let Some(&(_, _, outer)) = link.iter().find(|e| (e.0, e.1) == (a, b)) {
                    self.tris[t.0 as usize].n[k] = outer;
                    let o = &mut self.tris[outer.0 as usize];
                    let j = (0..3)
                        .find(|&j| o.v[(j + 1) % 3] == b && o.v[(j + 2) % 3] == a)
                        .expect("outer triangle shares the link edge");
                    o.n[j] = t;
                }
            }
        }
        self.stitch(&new_tris);
        for &t in &new_tris {
            for w in self.tris[t.0 as usize].v {
                if w != GHOST {
                    self.verts[w.0 as usize].as_mut().unwrap().tri = t;
                }
            }
        }
        let created: Vec<TriangleRecord> = new_tris
            .iter()
            .filter(|&&t| !self.tris[t.0 as usize].is_ghost())
            .map(|&t| self.triangle_record(t))
            .collect();
        self.hint = link.iter().map(|e| e.2).find(|&u| !self.tris[u.0 as usize].is_ghost()).unwrap_or(link[0].2);
        self.revision += 1;
        Ok(CavityDiff {
            kind: DiffKind::Remove,
            vertex: v,
            point: p,
            created,
            destroyed,
            exterior,
            revision: self.revision,
        })
    }

    /// Interior vertex: peel Delaunay ears off the link polygon.
    fn clip_ears(&self, link: &[(VertexId, VertexId, TriId)]) -> Vec<[VertexId; 3]> {
        // Chain the link edges into a ccw polygon.
        let mut poly: Vec<VertexId> = Vec::with_capacity(link.len());
        let mut cur = link[0].0;
        for _ in 0..link.len() {
            poly.push(cur);
            cur = link.iter().find(|e| e.0 == cur).expect("closed link").1;
        }
        debug_assert_eq!(cur, link[0].0);
        let pts: Vec<(Point, u64)> = poly.iter().map(|&w| (self.point(w), self.key(w))).collect();
        let mut idx: Vec<usize> = (0..poly.len()).collect();
        let mut out = Vec::with_capacity(poly.len() - 2);
        while idx.len() > 3 {
            let m = idx.len();
            let ear = (0..m)
                .find(|&i| {
                    let (a, b, c) = (idx[i], idx[(i + 1) % m], idx[(i + 2) % m]);
                    let (pa, pb, pc) = (pts[a], pts[b], pts[c]);
                    orientation(pa.0, pb.0, pc.0) == Orientation::CounterClockwise
                        && idx.iter().all(|&d| {
                            d == a
                                || d == b
                                || d == c
                                || !in_circumball_sos(pa.0, pb.0, pc.0, pts[d].0, [pa.1, pb.1, pc.1, pts[d].1])
                        })
                })
                .expect("a Delaunay ear exists");
            out.push([poly[idx[ear]], poly[idx[(ear + 1) % m]], poly[idx[(ear + 2) % m]]]);
            idx.remove((ear + 1) % m);
        }
        out.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
        out.sort_unstable();
        out
    }

    /// Delaunay triangles of the link vertices that lie in the hole.
    fn fill_hole(&self, ring: &[VertexId], link: &[(VertexId, VertexId, TriId)]) -> Vec<[VertexId; 3]> {
        let pts: Vec<Point> = ring.iter().map(|&w| self.point(w)).collect();
        let keys: Vec<u64> = ring.iter().map(|&w| self.key(w)).collect();
        let local = Triangulation::build_inner(&pts, &keys, true).expect("non-collinear link");
        let to_global = |w: VertexId| if w == GHOST { GHOST } else { ring[w.0 as usize] };
        // Rings are small; linear scans beat hashing here.
        let loc = |w: VertexId| {
            if w == GHOST {
                GHOST
            } else {
                VertexId(ring.iter().position(|&x| x == w).expect("ring vertex") as u32)
            }
        };
        let link_local: Vec<(VertexId, VertexId)> = link.iter().map(|&(a, b, _)| (loc(a), loc(b))).collect();
        let is_link = |x: VertexId, y: VertexId| link_local.iter().any(|&(a, b)| (a, b) == (x, y) || (a, b) == (y, x));
        let alive: Vec<TriId> = (0..local.tris.len()).filter(|&i| local.tris[i].alive).map(|i| TriId(i as u32)).collect();
        let mut seen: Vec<TriId> = Vec::new();
        let mut stack = Vec::new();
        for &(a, b) in &link_local {
            let t = *alive
                .iter()
                .find(|&&t| {
                    let v = local.tris[t.0 as usize].v;
                    (0..3).any(|k| v[k] == a && v[(k + 1) % 3] == b)
                })
                .expect("link edge in local triangulation");
            if !seen.contains(&t) {
                seen.push(t);
                stack.push(t);
            }
        }
        while let Some(t) = stack.pop() {
            let tri = &local.tris[t.0 as usize];
            for k in 0..3 {
                let (x, y) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if !is_link(x, y) && !seen.contains(&tri.n[k]) {
                    seen.push(tri.n[k]);
                    stack.push(tri.n[k]);
                }
            }
        }
        let mut out: Vec<[VertexId; 3]> = seen.into_iter().map(|t| local.tris[t.0 as usize].v.map(to_global)).collect();
        out.sort_unstable();
        out
    }

    /// Connects neighbour pointers among freshly created triangles.
    fn stitch(&mut self, new_tris: &[TriId]) {
        // Few edges per cavity; a linear scan is cheaper than hashing.
        let mut open: Vec<(VertexId, VertexId, TriId, usize)> = Vec::with_capacity(2 * new_tris.len());
        for &t in new_tris {
            for k in 0..3 {
                let tri = &self.tris[t.0 as usize];
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if tri.n[k] != NONE {
                    continue;
                }
                if let Some(i) = open.iter().position(|e| e.0 == b && e.1 == a) {
                    let (_, _, u, j) = open.swap_remove(i);
                    self.tris[t.0 as usize].n[k] = u;
                    self.tris[u.0 as usize].n[j] = t;
                } else {
                    open.push((a, b, t, k));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched edges after stitching");
    }

    fn conflicts(&self, t: TriId, p: Point, key: u64) -> bool {
        let tri = &self.tris[t.0 as usize];
        if tri.is_ghost() {
            let (a, b) = (self.point(tri.v[0]), self.point(tri.v[1]));
            match orientation(a, b, p) {
                Orientation::CounterClockwise => true,
                Orientation::Clockwise => false,
                Orientation::Collinear => {
                    // Strictly inside the hull segment.
                    let d = (b.x - a.x) * (p.x - a.x) + (b.y - a.y) * (p.y - a.y);
                    d > 0.0 && d < a.dist2(b)
                }
            }
        } else {
            let [a, b, c] = tri.v;
            in_circumball_sos(
                self.point(a),
                self.point(b),
                self.point(c),
                p,
                [self.key(a), self.key(b), self.key(c), key],
            )
        }
    }

    /// A triangle in conflict with `p`: the real triangle containing it, or
    /// a ghost facing it from outside the hull.
    fn locate(&self, p: Point) -> TriId {
        let mut t = self.start_triangle(p);
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            debug_assert!(steps < 10 * self.tris.len() + 100, "walk did not terminate");
            let tri = &self.tris[t.0 as usize];
            if tri.is_ghost() {
                return t;
            }
            // Rotate the starting edge to avoid cycling on degenerate input.
            let s = steps % 3;
            for j in 0..3 {
                let k = (s + j) % 3;
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if orientation(self.point(a), self.point(b), p) == Orientation::Clockwise {
                    t = tri.n[k];
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn start_triangle(&self, p: Point) -> TriId {
        let cell = self.grid_cell(p);
        let mut t = self.hint;
        if let Some(&v) = self.grid.get(&cell) {
            if self.contains_vertex(v) {
                t = self.vert(v).tri;
            }
        }
        if t == NONE || !self.tris[t.0 as usize].alive {
            t = self.triangle_ids().next().expect("triangulation has a triangle");
        }
        if self.tris[t.0 as usize].is_ghost() {
            t = self.tris[t.0 as usize].n[2];
        }
        t
    }

    fn grid_cell(&self, p: Point) -> (i64, i64) {
        ((p.x / self.grid_h).floor() as i64, (p.y / self.grid_h).floor() as i64)
    }

    fn grid_put(&mut self, v: VertexId) {
        if self.bare {
            return;
        }
        let c = self.grid_cell(self.point(v));
        self.grid.insert(c, v);
    }

    /// Whether diffs list the exterior triangles (on by default).
    pub fn set_record_exterior(&mut self, on: bool) {
        self.record_exterior = on;
    }

    /// Sets the jump-start grid spacing (typically a few interaction ranges).
    pub fn set_locate_scale(&mut self, h: f64) {
        assert!(h > 0.0 && h.is_finite());
        self.grid_h = h;
        self.grid.clear();
        let ids: Vec<VertexId> = self.vertex_ids().collect();
        for v in ids {
            self.grid_put(v);
        }
    }

    /// All triangles around `v` (ghosts included), counter-clockwise.
    fn star(&self, v: VertexId) -> Vec<TriId> {
        let t0 = self.vert(v).tri;
        let mut out = Vec::with_capacity(8);
        let mut t = t0;
        loop {
            out.push(t);
            let tri = &self.tris[t.0 as usize];
            let i = tri.index_of(v).expect("vertex in its star");
            // Next counter-clockwise: across the edge (v, v[i+2]).
            t = tri.n[(i + 1) % 3];
            if t == t0 {
                break;
            }
        }
        out
    }

    fn vert(&self, v: VertexId) -> &Vertex {
        self.verts[v.0 as usize].as_ref().expect("live vertex")
    }

    fn alloc_tri(&mut self, v: [VertexId; 3]) -> TriId {
        let ghost = v[2] == GHOST;
        let metrics = if ghost || self.bare {
            None
        } else {
            let [a, b, c] = v.map(|w| self.point(w));
            Some(triangle_metrics(a, b, c).expect("new triangle is non-degenerate"))
        };
        let tri = Tri { v, n: [NONE; 3], metrics, alive: true };
        if !ghost {
            self.n_real_tris += 1;
        }
        match self.free_tris.pop() {
            Some(i) => {
                self.tris[i as usize] = tri;
                TriId(i)
            }
            None => {
                self.tris.push(tri);
                TriId((self.tris.len() - 1) as u32)
            }
        }
    }

    fn free_tri(&mut self, t: TriId) {
        let tri = &mut self.tris[t.0 as usize];
        debug_assert!(tri.alive);
        tri.alive = false;
        if tri.v[2] != GHOST {
            self.n_real_tris -= 1;
        }
        self.free_tris.push(t.0);
    }

    /// Structural self-check: adjacency symmetry, orientation and local
    /// Delaunay property on every edge. Returns a description of the first fault.
    pub fn validate(&self) -> Result<(), String> {
        for (i, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            let t = TriId(i as u32);
            for k in 0..3 {
                let u = tri.n[k];
                if u == NONE || !self.tris[u.0 as usize].alive {
                    return Err(format!("{t:?} has dead neighbour"));
                }
                if !self.tris[u.0 as usize].n.contains(&t) {
                    return Err(format!("{t:?}/{u:?} adjacency not symmetric"));
                }
            }
            if !tri.is_ghost() {
                let [a, b, c] = tri.v.map(|w| self.point(w));
                if orientation(a, b, c) != Orientation::CounterClockwise {
                    return Err(format!("{t:?} not counter-clockwise"));
                }
                for k in 0..3 {
                    let u = &self.tris[tri.n[k].0 as usize];
                    let (x, y) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                    let opp = u.v.iter().copied().find(|&w| w != x && w != y).unwrap();
                    if opp != GHOST
                        && in_circumball_sos(
                            a,
                            b,
                            c,
                            self.point(opp),
                            [self.key(tri.v[0]), self.key(tri.v[1]), self.key(tri.v[2]), self.key(opp)],
                        )
                    {
                        return Err(format!("{t:?} not locally Delaunay"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn dedup_records(mut v: Vec<TriangleRecord>) -> Vec<TriangleRecord> {
    v.sort_by_key(|r| r.id);
    v.dedup_by_key(|r| r.id);
    v
}

/// Outcome of checking one created triangle against the circumradius
/// monotonicity under insertion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionLemmaCase {
    pub created: TriId,
    pub delta: f64,
    /// Largest circumradius among the prior real triangles on the opposite edge.
    pub bound: f64,
    /// Only one prior real triangle shared the edge (hull edge).
    pub hull_edge: bool,
    pub holds: bool,
}

/// For each created triangle `{x0, y, z}`, compares its circumradius with the
/// prior triangles sharing `{y, z}`. `slack` is relative.
pub fn point_insertion_lemma_check(diff: &CavityDiff, slack: f64) -> Vec<InsertionLemmaCase> {
    assert_eq!(diff.kind, DiffKind::Insert);
    let edge_has = |r: &TriangleRecord, y: VertexId, z: VertexId| r.vertices.contains(&y) && r.vertices.contains(&z);
    diff.created
        .iter()
        .map(|c| {
            let others: Vec<VertexId> = c.vertices.iter().copied().filter(|&w| w != diff.vertex).collect();
            let (y, z) = (others[0], others[1]);
            let prior: Vec<f64> = diff
                .destroyed
                .iter()
                .chain(diff.exterior.iter())
                .filter(|r| edge_has(r, y, z))
                .map(|r| r.metrics.circumradius)
                .collect();
            let bound = prior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let delta = c.metrics.circumradius;
            InsertionLemmaCase {
                created: c.id,
                delta,
                bound,
                hull_edge: prior.len() < 2,
                holds: delta <= bound * (1.0 + slack),
            }
        })
        .collect()
}
