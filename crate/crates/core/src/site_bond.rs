//! Mixed site-bond Bernoulli percolation on Z^2 windows `[-n, n]^2`.

use crate::rng::{substream, Rng as StreamRng};
use crate::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};
use std::collections::VecDeque;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SiteBondError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("site {site}: conditional {conditional} below p = {p}")]
    ConditionalBelowP { site: usize, conditional: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteBondParams {
    pub p: f64,
    pub p_prime: f64,
}

impl SiteBondParams {
    pub fn new(p: f64, p_prime: f64) -> Result<Self, SiteBondError> {
        if !((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&p_prime)) {
            return Err(SiteBondError::Params(format!("p = {p}, p' = {p_prime} must lie in [0, 1]")));
        }
        Ok(SiteBondParams { p, p_prime })
    }
}

/// Sites are row-major over `(x, y)` with `x` fastest. `right[i]` is the bond
/// from site `i` to `(x + 1, y)`, `up[i]` the bond to `(x, y + 1)`; bonds
/// leaving the window are unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeConfig {
    pub n: i64,
    pub sites: Vec<bool>,
    pub right: Vec<bool>,
    pub up: Vec<bool>,
}

/// Uniforms behind one configuration, so several `(p, p')` can share them.
#[derive(Debug, Clone)]
pub struct LatticeUniforms {
    pub n: i64,
    site: Vec<f64>,
    right: Vec<f64>,
    up: Vec<f64>,
}

impl LatticeUniforms {
    pub fn draw(n: i64, rng: &mut StreamRng) -> Self {
        let m = side(n) * side(n);
        let mut v = |_| (0..m).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
        let (site, right, up) = (v(0), v(1), v(2));
        LatticeUniforms { n, site, right, up }
    }

    pub fn config(&self, p: &SiteBondParams) -> LatticeConfig {
        LatticeConfig {
            n: self.n,
            sites: self.site.iter().map(|&u| u < p.p).collect(),
            right: self.right.iter().map(|&u| u < p.p_prime).collect(),
            up: self.up.iter().map(|&u| u < p.p_prime).collect(),
        }
    }
}

fn side(n: i64) -> usize {
    (2 * n + 1) as usize
}

pub fn sample(p: &SiteBondParams, n: i64, seed: u64) -> LatticeConfig {
    assert!(n >= 1, "window half-width must be positive");
    LatticeUniforms::draw(n, &mut substream(seed, &[0x517E])).config(p)
}

impl LatticeConfig {
    pub fn side(&self) -> usize {
        side(self.n)
    }

    pub fn index(&self, x: i64, y: i64) -> usize {
        ((y + self.n) as usize) * self.side() + (x + self.n) as usize
    }

    pub fn coords(&self, i: usize) -> (i64, i64) {
        let s = self.side();
        ((i % s) as i64 - self.n, (i / s) as i64 - self.n)
    }

    pub fn origin(&self) -> usize {
        self.index(0, 0)
    }

    fn neighbours(&self, i: usize, use_bonds: bool) -> impl Iterator<Item = usize> + '_ {
        let s = self.side();
        let (cx, cy) = (i % s, i / s);
        let mut out = [None; 4];
        if cx + 1 < s && (!use_bonds || self.right[i]) {
            out[0] = Some(i + 1);
        }
        if cx > 0 && (!use_bonds || self.right[i - 1]) {
            out[1] = Some(i - 1);
        }
        if cy + 1 < s && (!use_bonds || self.up[i]) {
            out[2] = Some(i + s);
        }
        if cy > 0 && (!use_bonds || self.up[i - s]) {
            out[3] = Some(i - s);
        }
        out.into_iter().flatten()
    }

    fn cluster(&self, use_bonds: bool) -> Vec<usize> {
        let o = self.origin();
        if !self.sites[o] {
            return Vec::new();
        }
        let mut seen = vec![false; self.sites.len()];
        seen[o] = true;
        let mut queue = VecDeque::from([o]);
        let mut out = vec![o];
        while let Some(i) = queue.pop_front() {
            for j in self.neighbours(i, use_bonds) {
                if self.sites[j] && !seen[j] {
                    seen[j] = true;
                    out.push(j);
                    queue.push_back(j);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Origin cluster through open sites and open bonds.
    pub fn open_cluster(&self) -> Vec<usize> {
        self.cluster(true)
    }

    /// Origin cluster through open sites only.
    pub fn site_cluster(&self) -> Vec<usize> {
        self.cluster(false)
    }

    pub fn touches_boundary(&self, cluster: &[usize]) -> bool {
        cluster.iter().any(|&i| {
            let (x, y) = self.coords(i);
            x.abs() == self.n || y.abs() == self.n
        })
    }

    /// `0 <-> complement of the window`.
    pub fn origin_connected(&self) -> bool {
        self.touches_boundary(&self.open_cluster())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub p: f64,
    pub p_prime: f64,
    pub n: i64,
    pub trials: usize,
    pub successes: usize,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval.
pub fn wilson(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn estimate_from(p: &SiteBondParams, n: i64, trials: usize, successes: usize) -> Estimate {
    let (ci_lo, ci_hi) = wilson(successes, trials, WILSON_Z95);
    Estimate {
        p: p.p,
        p_prime: p.p_prime,
        n,
        trials,
        successes,
        estimate: successes as f64 / trials as f64,
        ci_lo,
        ci_hi,
    }
}

/// Monte Carlo estimate of `mu_{p,p'}(0 <-> complement)`; trial `t` uses substream `(seed, t)`.
pub fn connect_prob(p: &SiteBondParams, n: i64, trials: usize, seed: u64) -> Estimate {
    assert!(trials >= 1);
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let u = LatticeUniforms::draw(n, &mut substream(seed, &[0x517E, t as u64]));
            u.config(p).origin_connected()
        })
        .count();
    estimate_from(p, n, trials, successes)
}

/// Estimates for several parameter pairs sharing the same uniforms per trial.
pub fn connect_prob_many(ps: &[SiteBondParams], n: i64, trials: usize, seed: u64) -> Vec<Estimate> {
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let u = LatticeUniforms::draw(n, &mut substream(seed, &[0x517E, t as u64]));
            ps.iter().map(|p| usize::from(u.config(p).origin_connected())).collect::<Vec<_>>()
        })
        .reduce(|| vec![0; ps.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    ps.iter().zip(counts).map(|(p, c)| estimate_from(p, n, trials, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarrisRow {
    pub p: f64,
    pub p_prime: f64,
    pub mixed: Estimate,
    pub site_only: Estimate,
    /// `sqrt(h1^2 + h2^2)` from the two Wilson half-widths.
    pub joint_half_width: f64,
    pub holds: bool,
}

/// `mu_{p,p'}(0 <-> c) >= mu_{pp',1}(0 <-> c) - 3 joint half-widths` on a grid.
pub fn harris_check(grid: &[f64], n: i64, trials: usize, seed: u64) -> Vec<HarrisRow> {
    let mut out = Vec::new();
    for (a, &p) in grid.iter().enumerate() {
        for (b, &pp) in grid.iter().enumerate() {
            let s = seed ^ ((a as u64) << 32 | b as u64);
            let mixed = connect_prob(&SiteBondParams { p, p_prime: pp }, n, trials, crate::rng::mix(s, &[1]));
            let site_only = connect_prob(&SiteBondParams { p: p * pp, p_prime: 1.0 }, n, trials, crate::rng::mix(s, &[2]));
            let jw = mixed.half_width().hypot(site_only.half_width());
            out.push(HarrisRow {
                p,
                p_prime: pp,
                mixed,
                site_only,
                joint_half_width: jw,
                holds: mixed.estimate >= site_only.estimate - 3.0 * jw,
            });
        }
    }
    out
}

pub fn write_estimates_csv(rows: &[Estimate], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "p,p_prime,n,estimate,ci_lo,ci_hi")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.17e},{:.17e},{:.17e}", r.p, r.p_prime, r.n, r.estimate, r.ci_lo, r.ci_hi)?;
    }
    Ok(())
}

/// Number of occupied sites at which an `l x l` box first has a left-right
/// open-site crossing, adding sites in a uniformly random order.
pub fn crossing_threshold(l: usize, rng: &mut StreamRng) -> usize {
    let m = l * l;
    let (left, right) = (m, m + 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut uf = UnionFind::new(m + 2);
    let mut open = vec![false; m];
    for (k, &i) in order.iter().enumerate() {
        open[i] = true;
        let (x, y) = (i % l, i / l);
        if x == 0 {
            uf.union(i, left);
        }
        if x + 1 == l {
            uf.union(i, right);
        }
        if x > 0 && open[i - 1] {
            uf.union(i, i - 1);
        }
        if x + 1 < l && open[i + 1] {
            uf.union(i, i + 1);
        }
        if y > 0 && open[i - l] {
            uf.union(i, i - l);
        }
        if y + 1 < l && open[i + l] {
            uf.union(i, i + l);
        }
        if uf.same(left, right) {
            return k + 1;
        }
    }
    m
}

/// Crossing probability at `p` from thresholds (canonical to grand-canonical
/// by binomial averaging).
pub fn crossing_curve(thresholds: &[usize], sites: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let b = Binomial::new(p, sites as u64).expect("valid binomial");
    let mean: f64 = thresholds.iter().map(|&k| if k == 0 { 1.0 } else { b.sf(k as u64 - 1) }).sum();
    mean / thresholds.len() as f64
}

fn intersection(a: &[usize], la: usize, b: &[usize], lb: usize) -> f64 {
    let f = |p: f64| crossing_curve(a, la * la, p) - crossing_curve(b, lb * lb, p);
    let (mut lo, mut hi) = (0.3, 0.9);
    // The smaller box crosses more easily below p_c and less easily above.
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcEstimate {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Box sides `2n + 1` used.
    pub sides: Vec<usize>,
    pub trials: usize,
}

/// Intersection of the crossing curves of the two largest boxes, with a
/// percentile bootstrap over trials.
pub fn estimate_pc_site(n_list: &[i64], trials: usize, seed: u64) -> Result<PcEstimate, SiteBondError> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 || ns[0] < 1 || trials < 2 {
        return Err(SiteBondError::Params("need two distinct sizes >= 1 and trials >= 2".into()));
    }
    let sides: Vec<usize> = ns.iter().map(|&n| side(n)).collect();
    let thr: Vec<Vec<usize>> = sides
        .iter()
        .map(|&l| {
            (0..trials)
                .into_par_iter()
                .map(|t| crossing_threshold(l, &mut substream(seed, &[0x9C, l as u64, t as u64])))
                .collect()
        })
        .collect();
    let k = sides.len();
    let (la, lb) = (sides[k - 2], sides[k - 1]);
    let estimate = intersection(&thr[k - 2], la, &thr[k - 1], lb);
    let boots: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|bi| {
            let mut rng = substream(seed, &[0xB007, bi]);
            let mut re = |v: &[usize]| (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect::<Vec<_>>();
            let a = re(&thr[k - 2]);
            let b = re(&thr[k - 1]);
            intersection(&a, la, &b, lb)
        })
        .collect();
    let mut sorted = boots;
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
    Ok(PcEstimate { estimate, ci_lo: q(0.025), ci_hi: q(0.975), sides, trials })
}

/// A law on `{0,1}^N` given through its sequential conditionals.
pub trait SiteMeasure {
    fn len(&self) -> usize;
    /// `P(site i open | sites 0..i)`.
    fn conditional(&self, i: usize, prefix: &[bool]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    pub probs: Vec<f64>,
}

impl SiteMeasure for ProductMeasure {
    fn len(&self) -> usize {
        self.probs.len()
    }

    fn conditional(&self, i: usize, _: &[bool]) -> f64 {
        self.probs[i]
    }
}

/// Explicit table over bit masks (bit `i` is site `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeasure {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl TableMeasure {
    pub fn from_fn(n: usize, f: impl Fn(&[bool]) -> f64) -> Self {
        let mut probs: Vec<f64> = (0..1usize << n).map(|a| f(&bits(a, n))).collect();
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|x| *x /= s);
        TableMeasure { n, probs }
    }
}

impl SiteMeasure for TableMeasure {
    fn len(&self) -> usize {
        self.n
    }

    fn conditional(&self, i: usize, prefix: &[bool]) -> f64 {
        let fixed: usize = prefix.iter().take(i).enumerate().map(|(j, &b)| usize::from(b) << j).sum();
        let mask = (1usize << i) - 1;
        let (mut num, mut den) = (0.0, 0.0);
        for (a, &w) in self.probs.iter().enumerate() {
            if a & mask == fixed {
                den += w;
                if a >> i & 1 == 1 {
                    num += w;
                }
            }
        }
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    }
}

pub fn bits(a: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| a >> i & 1 == 1).collect()
}

/// Inductive coupling of a site measure `nu` with Bernoulli(`p`) product so
/// that the first coordinate dominates the second on every atom.
pub struct CouplingM<'a, M: SiteMeasure> {
    pub measure: &'a M,
    pub p: f64,
}

impl<'a, M: SiteMeasure> CouplingM<'a, M> {
    pub fn new(measure: &'a M, p: f64) -> Result<Self, SiteBondError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SiteBondError::Params(format!("p = {p}")));
        }
        Ok(CouplingM { measure, p })
    }

    fn step(&self, i: usize, prefix: &[bool]) -> Result<f64, SiteBondError> {
        let c = self.measure.conditional(i, prefix);
        // Table conditionals carry rounding; a deficit under 1e-12 counts as equality.
        if c < self.p - 1e-12 {
            return Err(SiteBondError::ConditionalBelowP { site: i, conditional: c, p: self.p });
        }
        Ok(c.max(self.p))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<(Vec<bool>, Vec<bool>), SiteBondError> {
        let n = self.measure.len();
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let c = self.step(i, &a)?;
            let u: f64 = rng.random();
            a.push(u < c);
            b.push(u < self.p);
        }
        Ok((a, b))
    }

    /// Every atom `(first, second)` as bit masks with its probability.
    pub fn enumerate(&self) -> Result<Vec<(usize, usize, f64)>, SiteBondError> {
        let n = self.measure.len();
        let mut out = Vec::new();
        let mut stack = vec![(Vec::<bool>::new(), 0usize, 0usize, 1.0f64)];
        while let Some((pre, a, b, w)) = stack.pop() {
            let i = pre.len();
            if i == n {
                out.push((a, b, w));
                continue;
            }
            let c = self.step(i, &pre)?;
            let mut open = pre.clone();
            open.push(true);
            let mut closed = pre;
            closed.push(false);
            // Shared uniform: (1,1) w.p. p, (1,0) w.p. c - p, (0,0) w.p. 1 - c.
            stack.push((open.clone(), a | 1 << i, b | 1 << i, w * self.p));
            stack.push((open, a | 1 << i, b, w * (c - self.p)));
            stack.push((closed, a, b, w * (1.0 - c)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingCheck {
    pub first_marginal_error: f64,
    pub second_marginal_error: f64,
    /// Every atom of positive mass has `first >= second` site-wise.
    pub monotone: bool,
    pub atoms: usize,
}

/// Enumerates the coupling and compares its marginals with the table and the product law.
pub fn check_coupling(measure: &TableMeasure, p: f64) -> Result<CouplingCheck, SiteBondError> {
    let n = measure.n;
    let atoms = CouplingM::new(measure, p)?.enumerate()?;
    let mut first = vec![0.0; 1 << n];
    let mut second = vec![0.0; 1 << n];
    let mut monotone = true;
    for &(a, b, w) in &atoms {
        first[a] += w;
        second[b] += w;
        if w > 0.0 && b & !a != 0 {
            monotone = false;
        }
    }
    let product = |b: usize| -> f64 { (0..n).map(|i| if b >> i & 1 == 1 { p } else { 1.0 - p }).product() };
    let e1 = first.iter().zip(&measure.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let e2 = second.iter().enumerate().map(|(b, x)| (x - product(b)).abs()).fold(0.0, f64::max);
    Ok(CouplingCheck { first_marginal_error: e1, second_marginal_error: e2, monotone, atoms: atoms.len() })
}

/// Sites of `[-n, n]^2` as bit positions, row-major.
pub fn window_config_from_bits(n: i64, a: usize) -> LatticeConfig {
    let m = side(n) * side(n);
    LatticeConfig { n, sites: bits(a, m), right: vec![true; m], up: vec![true; m] }
}
