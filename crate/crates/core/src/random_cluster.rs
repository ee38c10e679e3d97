//! Hyperedge drawing, component counting, exact joint enumeration, cluster
//! sweeps and the Papangelou intensity estimate.

use crate::cells::Region;
use crate::delaunay::{DelaunayError, TriId, Triangulation, VertexId};
use crate::geom::{Point, TriangleMetrics};
use crate::potentials::{hamiltonian_with, phi_unchecked, Mark, MarkedConfiguration, ModelParams, PotentialError};
use crate::rng::{counter_uniform, substream};
use crate::sampler::ChainState;
use crate::thresholds::p_hat;
use crate::unionfind::UnionFind;
use rand::Rng;
use serde::Serialize;
use rustc_hash::FxHashMap as HashMap;
use std::collections::BTreeSet;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Params(#[from] PotentialError),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("hypotheses not met: {0}")]
    Hypothesis(String),
}

/// Opening probability of a triangle: `1 - exp(-phi(A))` inside, `1` outside (wired).
pub fn edge_prob(tm: &TriangleMetrics, in_region: bool, p: &ModelParams) -> f64 {
    if in_region {
        -(-phi_unchecked(tm.area, p.beta, p.gamma)).exp_m1()
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HyperedgeConfig {
    pub open: BTreeSet<TriId>,
}

impl HyperedgeConfig {
    pub fn components(&self, tri: &Triangulation, merged: &[VertexId]) -> usize {
        count_components(tri, self.open.iter().copied(), merged)
    }
}

/// Independent draws, each a function of `seed` and the triangle's vertex keys.
pub fn draw_edges(tri: &Triangulation, region: &Region, p: &ModelParams, seed: u64) -> HyperedgeConfig {
    let mut open = BTreeSet::new();
    for id in tri.triangle_ids() {
        let m = tri.triangle_metrics(id);
        let pr = edge_prob(&m, region.meets_closed_disk(m.circumcenter, m.circumradius), p);
        let mut k = tri.triangle_vertices(id).map(|v| tri.key(v));
        k.sort_unstable();
        if counter_uniform(seed, &k) < pr {
            open.insert(id);
        }
    }
    HyperedgeConfig { open }
}

/// Components of the hypergraph on the live vertices of `tri` with the given
/// open triangles; the vertices in `merged` count as one (wired) component.
pub fn count_components(tri: &Triangulation, open: impl IntoIterator<Item = TriId>, merged: &[VertexId]) -> usize {
    let cap = tri.vertex_capacity();
    let mut uf = UnionFind::new(cap);
    for w in merged.windows(2) {
        uf.union(w[0].0 as usize, w[1].0 as usize);
    }
    for t in open {
        let [a, b, c] = tri.triangle_vertices(t);
        uf.union(a.0 as usize, b.0 as usize);
        uf.union(a.0 as usize, c.0 as usize);
    }
    // Dead slots are singletons that never merged.
    uf.num_sets() - (cap - tri.num_vertices())
}

/// Total variation distance between two laws on the same index set.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Exact laws for a fixed point set.
///
/// Mark vectors are indexed base `q` over `free` (first free point is the least
/// significant digit, digit `d` is mark `d + 1`); edge sets are bit masks over
/// `triangles`, the window triangles. Triangles outside are wired open.
#[derive(Debug, Clone, Serialize)]
pub struct ExactTables {
    pub q: u16,
    pub free: Vec<VertexId>,
    pub triangles: Vec<TriId>,
    /// Conditional Potts law from the Hamiltonian.
    pub potts: Vec<f64>,
    /// `q^N_cc` weighted drawing law.
    pub cluster: Vec<f64>,
    /// Joint law conditioned on the event that open triangles are monochromatic.
    pub joint: Vec<f64>,
    pub joint_marks: Vec<f64>,
    pub joint_edges: Vec<f64>,
    pub tv_marks: f64,
    pub tv_edges: f64,
}

pub const MAX_ENUM_FREE: usize = 6;
pub const MAX_ENUM_Q: u16 = 3;
pub const MAX_ENUM_TRIANGLES: usize = 16;
const MAX_ENUM_TABLE: usize = 1 << 22;

pub fn mark_vector(index: usize, q: u16, n: usize) -> Vec<Mark> {
    let mut x = index;
    (0..n)
        .map(|_| {
            let d = x % q as usize;
            x /= q as usize;
            d as Mark + 1
        })
        .collect()
}

/// `cfg` holds the fixed points; frozen ones carry mark 1.
pub fn exact_joint_enumeration(
    cfg: &MarkedConfiguration,
    region: &Region,
    p: &ModelParams,
) -> Result<ExactTables, ClusterError> {
    p.validate()?;
    if cfg.points.iter().any(|m| m.frozen && m.mark != 1) {
        return Err(ClusterError::Hypothesis("frozen points must carry mark 1".into()));
    }
    let tri = Triangulation::build(&cfg.positions())?;
    let free: Vec<VertexId> = (0..cfg.len()).filter(|&i| !cfg.points[i].frozen).map(|i| VertexId(i as u32)).collect();
    let frozen: Vec<VertexId> = (0..cfg.len()).filter(|&i| cfg.points[i].frozen).map(|i| VertexId(i as u32)).collect();
    let n = free.len();
    let q = p.q;
    let mut triangles = Vec::new();
    let mut wired = Vec::new();
    for id in tri.triangle_ids() {
        let m = tri.triangle_metrics(id);
        if region.meets_closed_disk(m.circumcenter, m.circumradius) {
            triangles.push(id);
        } else {
            wired.push(id);
        }
    }
    let mt = triangles.len();
    let n_marks = (q as usize).checked_pow(n as u32).unwrap_or(usize::MAX);
    if n > MAX_ENUM_FREE || q > MAX_ENUM_Q || mt > MAX_ENUM_TRIANGLES || n_marks.saturating_mul(1 << mt) > MAX_ENUM_TABLE {
        return Err(ClusterError::TooLarge(format!("{n} free points, q = {q}, {mt} window triangles")));
    }
    let probe = hamiltonian_with(&tri, |_| 1, region, p);
    if !probe.admissible() {
        return Err(ClusterError::Hypothesis("fixed configuration is inadmissible".into()));
    }
    let prob: Vec<f64> = triangles.iter().map(|&t| edge_prob(&tri.triangle_metrics(t), true, p)).collect();
    let slot: HashMap<VertexId, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let marks_of = |sigma: &[Mark], v: VertexId| slot.get(&v).map_or(1, |&i| sigma[i]);

    let mut potts: Vec<f64> = (0..n_marks)
        .map(|s| {
            let sigma = mark_vector(s, q, n);
            let e = hamiltonian_with(&tri, |v| marks_of(&sigma, v), region, p);
            -e.finite
        })
        .collect();
    let top = potts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    potts.iter_mut().for_each(|x| *x = (*x - top).exp());
    normalise(&mut potts);

    let drawing = |mask: usize| -> f64 {
        prob.iter().enumerate().map(|(i, &pr)| if mask >> i & 1 == 1 { pr } else { 1.0 - pr }).product()
    };
    let mut cluster: Vec<f64> = (0..1usize << mt)
        .map(|mask| {
            let open = (0..mt).filter(|i| mask >> i & 1 == 1).map(|i| triangles[i]).chain(wired.iter().copied());
            let ncc = count_components(&tri, open, &frozen);
            drawing(mask) * f64::from(q).powi(ncc as i32 - n as i32)
        })
        .collect();
    normalise(&mut cluster);

    let mut joint = vec![0.0; n_marks << mt];
    for s in 0..n_marks {
        let sigma = mark_vector(s, q, n);
        let mono: Vec<bool> = triangles
            .iter()
            .map(|&t| {
                let [a, b, c] = tri.triangle_vertices(t).map(|v| marks_of(&sigma, v));
                a == b && b == c
            })
            .collect();
        let wired_ok = wired.iter().all(|&t| {
            let [a, b, c] = tri.triangle_vertices(t).map(|v| marks_of(&sigma, v));
            a == b && b == c
        });
        if !wired_ok {
            continue;
        }
        for mask in 0..1usize << mt {
            if (0..mt).all(|i| mask >> i & 1 == 0 || mono[i]) {
                joint[(s << mt) | mask] = drawing(mask);
            }
        }
    }
    normalise(&mut joint);
    let mut joint_marks = vec![0.0; n_marks];
    let mut joint_edges = vec![0.0; 1 << mt];
    for (i, w) in joint.iter().enumerate() {
        joint_marks[i >> mt] += w;
        joint_edges[i & ((1 << mt) - 1)] += w;
    }
    Ok(ExactTables {
        q,
        tv_marks: total_variation(&joint_marks, &potts),
        tv_edges: total_variation(&joint_edges, &cluster),
        free,
        triangles,
        potts,
        cluster,
        joint,
        joint_marks,
        joint_edges,
    })
}

pub fn write_table_csv(weights: &[f64], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "state,weight")?;
    for (i, x) in weights.iter().enumerate() {
        writeln!(w, "{i},{x:.17e}")?;
    }
    Ok(())
}

/// Edwards-Sokal update of the marks at fixed points. Frozen vertices form one
/// wired component that keeps mark 1; other components get fresh uniform marks.
pub fn cluster_sweep(st: &mut ChainState) {
    st.refresh_cache();
    let cap = st.tri.vertex_capacity();
    let boundary = cap;
    let mut uf = UnionFind::new(cap + 1);
    for v in st.tri.vertex_ids() {
        if st.frozen[v.0 as usize] {
            uf.union(v.0 as usize, boundary);
        }
    }
    for t in &st.cache.tris {
        let [a, b, c] = t.v.map(|v| v.0 as usize);
        let open = if !t.in_region {
            true
        } else {
            let mono = st.marks[a] == st.marks[b] && st.marks[b] == st.marks[c];
            // Draw regardless so the stream does not depend on the marks.
            let u: f64 = st.rng.random();
            mono && u < t.p_open
        };
        if open {
            uf.union(a, b);
            uf.union(a, c);
        }
    }
    let broot = uf.find(boundary);
    let q = st.params.q;
    let mut fresh: HashMap<usize, Mark> = HashMap::default();
    let free: Vec<VertexId> = st.free_vertices().to_vec();
    for v in free {
        let r = uf.find(v.0 as usize);
        let m = if r == broot {
            1
        } else {
            *fresh.entry(r).or_insert_with(|| st.rng.random_range(1..=q))
        };
        st.marks[v.0 as usize] = m;
    }
    st.energy.finite = st
        .cache
        .tris
        .iter()
        .filter(|t| t.in_region)
        .filter(|t| {
            let [a, b, c] = t.v.map(|v| st.marks[v.0 as usize]);
            !(a == b && b == c)
        })
        .map(|t| t.phi)
        .sum();
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PapangelouEstimate {
    pub ratio: f64,
    pub sigma: f64,
    pub bound: f64,
    pub holds: bool,
    pub samples: usize,
}

/// `q^(1 - 2 pi / alpha0)`.
pub fn papangelou_bound(q: u16, alpha0: f64) -> f64 {
    f64::from(q).powf(1.0 - 2.0 * std::f64::consts::PI / alpha0)
}

/// Ratio of the `q^N_cc` drawing integrals with and without `x0`, sharing the
/// draws on the triangles the insertion leaves untouched. Frozen points of
/// `cfg` are wired together.
pub fn papangelou_check(
    cfg: &MarkedConfiguration,
    region: &Region,
    x0: Point,
    p: &ModelParams,
    samples: usize,
    seed: u64,
) -> Result<PapangelouEstimate, ClusterError> {
    p.validate()?;
    if samples < 2 {
        return Err(ClusterError::Hypothesis("need at least two samples".into()));
    }
    if !region.contains(x0) {
        return Err(ClusterError::Hypothesis("x0 must lie in the window".into()));
    }
    let t0 = Triangulation::build(&cfg.positions())?;
    let mut t1 = t0.clone();
    let d = t1.insert(x0)?;
    for (name, t) in [("without", &t0), ("with", &t1)] {
        if !hamiltonian_with(t, |_| 1, region, p).admissible() {
            return Err(ClusterError::Hypothesis(format!("energy infinite {name} x0")));
        }
    }
    let bound = papangelou_bound(p.q, p.alpha0);
    if p.q == 1 {
        return Ok(PapangelouEstimate { ratio: 1.0, sigma: 0.0, bound, holds: true, samples });
    }
    let frozen: Vec<VertexId> = (0..cfg.len()).filter(|&i| cfg.points[i].frozen).map(|i| VertexId(i as u32)).collect();
    let destroyed: BTreeSet<TriId> = d.destroyed.iter().map(|r| r.id).collect();
    let with_prob = |t: &Triangulation, id: TriId| {
        let m = t.triangle_metrics(id);
        (id, edge_prob(&m, region.meets_closed_disk(m.circumcenter, m.circumradius), p))
    };
    let ext: Vec<(TriId, f64)> = t0.triangle_ids().filter(|t| !destroyed.contains(t)).map(|t| with_prob(&t0, t)).collect();
    let minus: Vec<(TriId, f64)> = d.destroyed.iter().map(|r| with_prob(&t0, r.id)).collect();
    let plus: Vec<(TriId, f64)> = d.created.iter().map(|r| with_prob(&t1, r.id)).collect();

    let mut rng = substream(seed, &[0xA9A7]);
    let mut pairs = Vec::with_capacity(samples);
    let draw = |set: &[(TriId, f64)], rng: &mut crate::rng::Rng| -> Vec<TriId> {
        set.iter().filter(|(_, pr)| rng.random::<f64>() < *pr).map(|(t, _)| *t).collect()
    };
    for _ in 0..samples {
        let e = draw(&ext, &mut rng);
        let a = draw(&plus, &mut rng);
        let b = draw(&minus, &mut rng);
        let n1 = count_components(&t1, e.iter().chain(a.iter()).copied(), &frozen) as i32;
        let n0 = count_components(&t0, e.iter().chain(b.iter()).copied(), &frozen) as i32;
        pairs.push((n1, n0));
    }
    let c = pairs.iter().map(|&(a, b)| a.max(b)).max().unwrap();
    let qf = f64::from(p.q);
    let xs: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (qf.powi(a - c), qf.powi(b - c))).collect();
    let k = samples as f64;
    let mx = xs.iter().map(|x| x.0).sum::<f64>() / k;
    let my = xs.iter().map(|x| x.1).sum::<f64>() / k;
    let ratio = mx / my;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &xs {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cxy += (x - mx) * (y - my);
    }
    let (vx, vy, cxy) = (vx / (k - 1.0), vy / (k - 1.0), cxy / (k - 1.0));
    let var = ((vx - 2.0 * ratio * cxy + ratio * ratio * vy) / (k * my * my)).max(0.0);
    let sigma = var.sqrt();
    Ok(PapangelouEstimate { ratio, sigma, bound, holds: ratio >= bound - 3.0 * sigma, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonViolation {
    pub triangle: TriId,
    pub area: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Window triangles with `A <= (3 sqrt 3 / 4) R^2` and
/// `p / (q^2 (1 - p)) < p_hat / (1 - p_hat)` (relative slack `1e-12`).
pub fn comparison_check(tri: &Triangulation, region: &Region, p: &ModelParams) -> Result<Vec<ComparisonViolation>, ClusterError> {
    let ph = p_hat(p.beta, p.q, p.big_r).map_err(|e| ClusterError::Hypothesis(e.to_string()))?;
    let rhs = ph / (1.0 - ph);
    let amax = 0.75 * 3f64.sqrt() * p.big_r * p.big_r;
    let q2 = f64::from(p.q).powi(2);
    let mut out = Vec::new();
    for id in tri.del3_region(region) {
        let m = tri.triangle_metrics(id);
        if m.area > amax {
            continue;
        }
        let pr = edge_prob(&m, true, p);
        let lhs = pr / (q2 * (1.0 - pr));
        if lhs < rhs * (1.0 - 1e-12) {
            out.push(ComparisonViolation { triangle: id, area: m.area, lhs, rhs });
        }
    }
    Ok(out)
}
