//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance -- c4 c7` runs a subset.

use dpotts::cells::{CellGrid, Region};
use dpotts::coarse_grain::{build_field_from, path_consistency_check, soundness_check};
use dpotts::delaunay::{point_insertion_lemma_check, Triangulation, VertexId};
use dpotts::experiments::{phase_scan, random_fixed_instance, ExperimentConfig, GridSpec, Mode, RunSpec, ScanParam};
use dpotts::geom::Point;
use dpotts::potentials::{MarkedConfiguration, MarkedPoint, ModelParams};
use dpotts::pseudo_periodic::{generate, patch, verify_hardcore, PseudoPeriodicSpec};
use dpotts::random_cluster::{cluster_sweep, exact_joint_enumeration, papangelou_check, total_variation};
use dpotts::rng::substream;
use dpotts::sampler::{pseudo_periodic_setup, ChainState, Schedule};
use dpotts::site_bond::{check_coupling, estimate_pc_site, harris_check, TableMeasure};
use dpotts::stats::poisson_chi_square;
use dpotts::thresholds::*;
use rand::Rng;
use std::time::{Duration, Instant};

// Tolerances and budgets, fixed.
const TV_EXACT: f64 = 1e-10;
const LEMMA_SLACK: f64 = 1e-9;
const THRESH_REL: f64 = 1e-12;
const CHI_P_MIN: f64 = 0.01;
const TV_DYNAMICS: f64 = 0.01;
const PAPANGELOU_SIGMAS: f64 = 3.0;
const PC_RANGE: (f64, f64) = (0.55, 0.65);
const COUPLING_TOL: f64 = 1e-12;
const PHASE_HALF_WIDTHS: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn free_params(q: u16, beta: f64) -> ModelParams {
    ModelParams { z: 1.0, q, beta, gamma: 1.0, r: 0.01, big_r: 100.0, alpha0: 0.01, hardcore: false }
}

fn split(cfg: &MarkedConfiguration) -> (MarkedConfiguration, MarkedConfiguration) {
    let (b, f): (Vec<MarkedPoint>, Vec<MarkedPoint>) = cfg.points.iter().partition(|m| m.frozen);
    (MarkedConfiguration { points: b }, MarkedConfiguration { points: f })
}

// Geometry shared by the dense-regime criteria.
const DENSE_R: f64 = 0.04;
const DENSE_BIG_R: f64 = 1.0;
const DENSE_ALPHA0: f64 = 0.03;
const DENSE_Z: f64 = 250.0;
const DENSE_BETA: f64 = 2.0;

fn dense_geometry() -> (f64, f64) {
    let rho = 0.5 * rho0_prime(DENSE_R, DENSE_BIG_R, DENSE_ALPHA0).unwrap();
    let i0 = ell_interval(DENSE_R, DENSE_BIG_R, DENSE_ALPHA0, rho).unwrap();
    (i0.lo + 0.1 * (i0.hi - i0.lo), rho)
}

fn dense_params(beta: f64) -> ModelParams {
    ModelParams { z: DENSE_Z, q: 2, beta, gamma: 1.0, r: DENSE_R, big_r: DENSE_BIG_R, alpha0: DENSE_ALPHA0, hardcore: true }
}

fn dense_schedule() -> Schedule {
    Schedule { geometric: 500, move_fraction: 0.3, move_step: 0.05, heatbath: 1, cluster: 1 }
}

fn c1() -> Outcome {
    let betas = [0.1, 1.0, 10.0];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..54u64 {
        let q = 2 + (i % 2) as u16;
        let beta = betas[(i / 2 % 3) as usize];
        let n = 1 + (i % 5) as usize;
        let (cfg, region) = random_fixed_instance(n, 101, i);
        match exact_joint_enumeration(&cfg, &region, &free_params(q, beta)) {
            Ok(t) => {
                worst = worst.max(t.tv_marks).max(t.tv_edges);
                count += 1;
            }
            Err(e) => return outcome(false, format!("instance {i}: {e}")),
        }
    }
    outcome(count >= 50 && worst <= TV_EXACT, format!("{count} instances, max TV {worst:.2e}"))
}

fn c2() -> Outcome {
    let (mut total, mut bad, mut hull) = (0usize, 0usize, 0usize);
    let mut worst_excess: f64 = 0.0;
    for inst in 0..100u64 {
        let mut rng = substream(202, &[inst]);
        let pseudo = inst % 2 == 0;
        let pts: Vec<Point> = if pseudo {
            let spec = PseudoPeriodicSpec::new(1.0, 0.1).unwrap();
            generate(&spec, patch(12, 12), inst).positions()
        } else {
            (0..400).map(|_| Point::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)).collect()
        };
        let grid = CellGrid::new(1.0);
        let mut t = Triangulation::build(&pts).unwrap();
        t.set_locate_scale(1.0);
        for _ in 0..1000 {
            let p = if pseudo {
                grid.from_lattice(rng.random_range(3.0..8.0), rng.random_range(3.0..8.0))
            } else {
                Point::new(rng.random_range(2.0..8.0), rng.random_range(2.0..8.0))
            };
            let Ok(d) = t.insert(p) else { continue };
            total += 1;
            for c in point_insertion_lemma_check(&d, LEMMA_SLACK) {
                if c.hull_edge {
                    hull += 1;
                } else if !c.holds {
                    bad += 1;
                    worst_excess = worst_excess.max(c.delta / c.bound - 1.0);
                }
            }
            t.remove(d.vertex).unwrap();
        }
    }
    outcome(
        total >= 100_000 && bad == 0,
        format!("{total} insertions, {bad} violations (worst excess {worst_excess:.2e}), {hull} hull-edge cases"),
    )
}

fn c3() -> Outcome {
    let mut mismatches = 0;
    let mut checks = 0;
    let mut ops = 0;
    for s in 0..1000u64 {
        let mut rng = substream(303, &[s]);
        let snap = s % 4 == 0;
        let draw = |rng: &mut dpotts::rng::Rng| {
            if snap {
                Point::new(rng.random_range(0..12) as f64, rng.random_range(0..12) as f64)
            } else {
                Point::new(rng.random::<f64>(), rng.random::<f64>())
            }
        };
        let init: Vec<Point> = (0..5).map(|_| draw(&mut rng)).collect();
        let Ok(mut t) = Triangulation::build(&init) else { continue };
        let len = rng.random_range(1..=200);
        for step in 0..len {
            if rng.random_bool(0.6) || t.num_vertices() <= 4 {
                let _ = t.insert(draw(&mut rng));
            } else {
                let ids: Vec<VertexId> = t.vertex_ids().collect();
                let _ = t.remove(ids[rng.random_range(0..ids.len())]);
            }
            ops += 1;
            if step % 50 == 49 || step + 1 == len {
                let ids: Vec<VertexId> = t.vertex_ids().collect();
                let pts: Vec<Point> = ids.iter().map(|&v| t.point(v)).collect();
                let keys: Vec<u64> = ids.iter().map(|&v| t.key(v)).collect();
                checks += 1;
                let same = Triangulation::build_keyed(&pts, &keys).is_ok_and(|r| r.key_triangles() == t.key_triangles());
                if !same || t.validate().is_err() {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("1000 sequences, {ops} operations, {checks} comparisons, {mismatches} mismatches"))
}

fn c4() -> Outcome {
    let (r, big_r, a0) = (0.04, 1.0, 0.03);
    let rho = 0.5 * rho0(r, big_r, a0).unwrap();
    let ell = hardcore_ell_window(r, big_r, rho).unwrap().midpoint().unwrap();
    let spec = PseudoPeriodicSpec::new(ell, rho).unwrap();
    let p = ModelParams { z: 1.0, q: 2, beta: 1.0, gamma: 1.0, r, big_r, alpha0: a0, hardcore: true };
    let (mut viol, mut tris, mut unsat) = (0usize, 0usize, 0usize);
    for seed in 0..1000u64 {
        let rep = verify_hardcore(&generate(&spec, patch(20, 20), seed), &spec, &p).unwrap();
        tris += rep.triangles_checked;
        viol += rep.violations.len();
        unsat += usize::from(!rep.hypotheses_satisfied);
    }
    outcome(
        viol == 0 && unsat == 0 && tris > 0,
        format!("rho {rho:.5}, ell {ell:.5}, {tris} interior triangles, {viol} violations"),
    )
}

fn c5() -> Outcome {
    let text = include_str!("data/thresholds_oracle.csv");
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / b.abs() };
    for l in text.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        let x = |i: usize| f[i].parse::<f64>().unwrap();
        let (r, big_r, a0, rho, ell, beta, pc) = (x(0), x(1), x(2), x(3), x(4), x(5), x(6));
        let q: u16 = f[7].parse().unwrap();
        let w = hardcore_ell_window(r, big_r, rho).unwrap();
        let i0 = ell_interval(r, big_r, a0, rho).unwrap();
        let got = [
            l_of_rho(rho).unwrap(),
            u_of_rho(rho).unwrap(),
            rho0(r, big_r, a0).unwrap(),
            z0_prime(beta, rho, ell).unwrap(),
            z0_doubleprime(ell, q, r, big_r, a0, pc).unwrap(),
            m_pack(ell, r, a0),
            beta0_prime(ell, q, big_r, r, a0, pc).unwrap(),
            p_hat(beta, q, big_r).unwrap(),
            c_gamma_bound(beta, ell, rho).unwrap(),
            epsilon(pc).unwrap(),
            w.lo,
            w.hi,
            i0.lo,
            i0.hi,
        ];
        for (k, g) in got.iter().enumerate() {
            worst = worst.max(rel(*g, x(8 + k)));
        }
        rows += 1;
    }
    let mut rng = substream(505, &[]);
    let mut empty = 0;
    for _ in 0..100_000 {
        let r = rng.random_range(1e-4..1.0);
        let big_r = r * rng.random_range(1.0001..100.0);
        let a0 = rng.random_range(1e-3..1.04);
        let rho = rho0(r, big_r, a0).unwrap() * rng.random_range(0.0..1.0);
        if rho <= 0.0 {
            continue;
        }
        if r / l_of_rho(rho).unwrap() >= big_r / u_of_rho(rho).unwrap() {
            empty += 1;
        }
    }
    outcome(
        rows == 100 && worst <= THRESH_REL && empty == 0,
        format!("{rows} oracle rows, worst relative error {worst:.2e}; {empty} empty windows in 1e5 draws below rho0"),
    )
}

fn c6() -> Outcome {
    let (min, max) = (Point::new(0.0, 0.0), Point::new(5.0, 5.0));
    let region = Region::Rect { min, max };
    let p = ModelParams { z: 2.0, q: 2, beta: 0.0, gamma: 1.0, r: 0.01, big_r: 100.0, alpha0: 0.01, hardcore: false };
    let mean = p.z * f64::from(p.q) * region.area();
    let corners = MarkedConfiguration {
        points: [(-1.0, -1.0), (6.0, -1.0), (6.0, 6.0), (-1.0, 6.0)]
            .iter()
            .map(|&(x, y)| MarkedPoint { point: Point::new(x, y), mark: 1, frozen: true })
            .collect(),
    };
    let s = Schedule { geometric: 1000, move_fraction: 0.0, move_step: 0.5, heatbath: 0, cluster: 0 };
    let mut ps = Vec::new();
    for seed in 1..=3u64 {
        let mut st = ChainState::init(p, region.clone(), &corners, &MarkedConfiguration::default(), seed, 0).unwrap();
        for _ in 0..200 {
            st.sweep(&s);
        }
        let ns: Vec<u64> = (0..10_000).map(|_| st.sweep(&s).n as u64).collect();
        if let Err(e) = st.check_invariants() {
            return outcome(false, format!("seed {seed}: {e}"));
        }
        ps.push(poisson_chi_square(&ns, mean, 20.0).p_value);
    }
    let ok = ps.iter().all(|&x| x > CHI_P_MIN);
    outcome(ok, format!("mean {mean}, p-values {:?}", ps.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()))
}

fn c7() -> Outcome {
    const SWEEPS: usize = 1_000_000;
    let betas = [0.1, 1.0, 10.0];
    let mut worst_hb: f64 = 0.0;
    let mut worst_cl: f64 = 0.0;
    for i in 0..20u64 {
        let p = free_params(2, betas[(i % 3) as usize]);
        let (cfg, region) = random_fixed_instance(5, 707, i);
        let exact = match exact_joint_enumeration(&cfg, &region, &p) {
            Ok(t) => t.potts,
            Err(e) => return outcome(false, format!("instance {i}: {e}")),
        };
        let (b, f) = split(&cfg);
        let q = p.q as usize;
        let free: Vec<VertexId> = (4..9).map(VertexId).collect();
        for cluster in [false, true] {
            let mut st = ChainState::init(p, region.clone(), &b, &f, 7, i * 2 + u64::from(cluster)).unwrap();
            let mut counts = vec![0u64; exact.len()];
            for k in 0..SWEEPS + 1000 {
                if cluster {
                    cluster_sweep(&mut st);
                } else {
                    st.heatbath_pass();
                }
                if k >= 1000 {
                    let idx = free.iter().rev().fold(0usize, |acc, &v| acc * q + (st.mark(v) as usize - 1));
                    counts[idx] += 1;
                }
            }
            let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / SWEEPS as f64).collect();
            let tv = total_variation(&emp, &exact);
            if cluster {
                worst_cl = worst_cl.max(tv);
            } else {
                worst_hb = worst_hb.max(tv);
            }
            if let Err(e) = st.check_energy() {
                return outcome(false, format!("instance {i}: {e}"));
            }
        }
    }
    outcome(
        worst_hb < TV_DYNAMICS && worst_cl < TV_DYNAMICS,
        format!("20 instances, q = 2, max TV heat-bath {worst_hb:.4}, cluster {worst_cl:.4}"),
    )
}

fn c8() -> Outcome {
    let p = ModelParams {
        z: 1.0,
        q: 2,
        beta: 1.0,
        gamma: 1.0,
        r: 0.1,
        big_r: 2.0,
        alpha0: std::f64::consts::PI / 8.0,
        hardcore: true,
    };
    let spec = PseudoPeriodicSpec::new(1.0, 0.05).unwrap();
    let grid = CellGrid::new(1.0);
    let region = Region::from_cells(grid, [(2, 2), (2, 3), (3, 2), (3, 3)]);
    let (mut held, mut n, mut retries) = (0, 0, 0);
    let mut worst_margin = f64::INFINITY;
    let bound = dpotts::random_cluster::papangelou_bound(p.q, p.alpha0);
    for inst in 0..1000u64 {
        let mut cfg = generate(&spec, patch(6, 6), inst);
        for m in &mut cfg.points {
            m.frozen = !region.contains(m.point);
        }
        let tri = Triangulation::build(&cfg.positions()).unwrap();
        let window: Vec<_> = tri.del3_region(&region);
        let mut rng = substream(808, &[inst]);
        let mut done = false;
        for _ in 0..200 {
            let t = window[rng.random_range(0..window.len())];
            let m = tri.triangle_metrics(t);
            let (rad, ang) = (0.3 * m.circumradius * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
            let x0 = Point::new(m.circumcenter.x + rad * ang.cos(), m.circumcenter.y + rad * ang.sin());
            if !region.contains(x0) {
                retries += 1;
                continue;
            }
            match papangelou_check(&cfg, &region, x0, &p, 2000, inst) {
                Ok(e) => {
                    n += 1;
                    held += usize::from(e.holds);
                    worst_margin = worst_margin.min((e.ratio - (e.bound - PAPANGELOU_SIGMAS * e.sigma)) / e.bound);
                    done = true;
                    break;
                }
                Err(_) => retries += 1,
            }
        }
        if !done {
            return outcome(false, format!("instance {inst}: no admissible insertion found"));
        }
    }
    outcome(
        held == n && n == 1000,
        format!("{held}/{n} hold, bound {bound:.3e}, min (ratio - bound + 3 sigma)/bound {worst_margin:.3e}, {retries} rejected proposals"),
    )
}

fn c9() -> Outcome {
    let (ell, rho) = dense_geometry();
    let spec = PseudoPeriodicSpec::new(ell, rho).unwrap();
    let grid = CellGrid::new(ell);
    let window = Region::window(grid, 1);
    let p = dense_params(DENSE_BETA);
    let s = dense_schedule();
    let (mut states, mut path_bad, mut sound_bad, mut spanning, mut open_pairs) = (0, 0, 0, 0, 0usize);
    for chain in 0..2u64 {
        let (b, f) = pseudo_periodic_setup(&p, &spec, &window, 900 + chain).unwrap();
        let mut st = ChainState::init(p, window.clone(), &b, &f, 900 + chain, chain).unwrap();
        for _ in 0..300 {
            st.sweep(&s);
        }
        for _ in 0..500 {
            st.sweep(&s);
            st.sweep(&s);
            let tri = st.triangulation();
            let field = build_field_from(tri.vertex_ids().map(|v| (tri.point(v), st.mark(v))), &grid, 1);
            path_bad += path_consistency_check(tri, |v| st.mark(v), &field).len();
            sound_bad += soundness_check(tri, |v| st.mark(v), &field).len();
            let perc = dpotts::coarse_grain::cell_percolation(&field);
            spanning += usize::from(perc.origin_reaches_complement);
            open_pairs += field.cells().filter(|&c| field.in_window(c) && field.get(c) == Some(true)).count();
            states += 1;
        }
        if let Err(e) = st.check_invariants() {
            return outcome(false, format!("chain {chain}: {e}"));
        }
    }
    outcome(
        path_bad == 0 && sound_bad == 0 && spanning > 0,
        format!(
            "{states} states, {path_bad} path and {sound_bad} soundness violations; origin spans in {spanning}, mean open window cells {:.2}",
            open_pairs as f64 / states as f64
        ),
    )
}

fn c10() -> Outcome {
    let pc = match estimate_pc_site(&[16, 32, 64], 400, 1010) {
        Ok(x) => x,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pc_ok = pc.estimate >= PC_RANGE.0 && pc.estimate <= PC_RANGE.1;
    let harris = harris_check(&[0.6, 0.7, 0.8, 0.9], 16, 2000, 1011);
    let h_ok = harris.len() == 16 && harris.iter().all(|h| h.holds);
    // Ferromagnetic table on 3x3 sites with a field; p set to its smallest conditional.
    let nb = |i: usize, j: usize| {
        let (a, b) = ((i % 3) as i64, (i / 3) as i64);
        let (c, d) = ((j % 3) as i64, (j / 3) as i64);
        (a - c).abs() + (b - d).abs() == 1
    };
    let table = TableMeasure::from_fn(9, |x| {
        let mut e = 0.0;
        for i in 0..9 {
            e += if x[i] { 0.8 } else { 0.0 };
            for j in i + 1..9 {
                if nb(i, j) && x[i] == x[j] {
                    e += 0.4;
                }
            }
        }
        f64::exp(e)
    });
    let mut pmin: f64 = 1.0;
    use dpotts::site_bond::SiteMeasure;
    for a in 0..1usize << 9 {
        let x = dpotts::site_bond::bits(a, 9);
        for i in 0..9 {
            pmin = pmin.min(table.conditional(i, &x[..i]));
        }
    }
    let mut c_ok = true;
    let mut worst: f64 = 0.0;
    for p in [pmin, 0.5 * pmin, 0.1] {
        match check_coupling(&table, p) {
            Ok(c) => {
                worst = worst.max(c.first_marginal_error).max(c.second_marginal_error);
                c_ok &= c.monotone && c.first_marginal_error <= COUPLING_TOL && c.second_marginal_error <= COUPLING_TOL;
            }
            Err(_) => c_ok = false,
        }
    }
    outcome(
        pc_ok && h_ok && c_ok,
        format!(
            "p_c {:.4} [{:.4}, {:.4}] sides {:?}; Harris {}/16; 3x3 coupling max marginal error {worst:.1e}, p_min {pmin:.4}",
            pc.estimate,
            pc.ci_lo,
            pc.ci_hi,
            pc.sides,
            harris.iter().filter(|h| h.holds).count()
        ),
    )
}

fn c11() -> Outcome {
    let (ell, rho) = dense_geometry();
    let cfg = ExperimentConfig {
        mode: Mode::Coarse,
        seeds: vec![1, 2],
        out: "unused".into(),
        window_n: 1,
        chains: 1,
        p_c: P_C_SITE_DEFAULT,
        model: dense_params(0.0),
        grid: GridSpec { ell, rho },
        schedule: dense_schedule(),
        run: RunSpec { burn_in: 300, sweeps: 1500, thin: 3, check_every: 50 },
        scan: Default::default(),
        sitebond: Default::default(),
        enumerate: Default::default(),
        pseudo: Default::default(),
    };
    let (rows, csv) = match phase_scan(&cfg, ScanParam::Beta, &[0.0, 0.5, DENSE_BETA]) {
        Ok(x) => x,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (base, top) = (&rows[0], &rows[rows.len() - 1]);
    let gap = top.dominance.mean - base.dominance.mean;
    let need = PHASE_HALF_WIDTHS * (top.dominance.half_width + base.dominance.half_width);
    let viol: usize = rows.iter().map(|r| r.violations).sum();
    let pass = gap >= need && top.spanning > base.spanning && viol == 0;
    outcome(pass, format!("dominance gap {gap:.4} vs required {need:.4}; spanning {:.3} vs {:.3}\n{csv}", top.spanning, base.spanning))
}

fn main() {
    let all: [(&str, &str, u64, fn() -> Outcome); 11] = [
        ("c1", "coupling exactness", 120, c1),
        ("c2", "point insertion lemma", 60, c2),
        ("c3", "incremental vs rebuild", 120, c3),
        ("c4", "pseudo-periodic hardcore", 120, c4),
        ("c5", "threshold values", 10, c5),
        ("c6", "Poisson reduction", 120, c6),
        ("c7", "mark dynamics", 180, c7),
        ("c8", "Papangelou bound", 180, c8),
        ("c9", "coarse-grain soundness", 300, c9),
        ("c10", "site-bond lab", 300, c10),
        ("c11", "phase behaviour", 900, c11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, f) in all {
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let in_time = el <= Duration::from_secs(budget);
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {id} {name} ({:.1}s of {budget}s{}): {}",
            if pass { "PASS" } else { "FAIL" },
            el.as_secs_f64(),
            if in_time { "" } else { ", over budget" },
            o.detail
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
