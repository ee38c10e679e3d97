use dpotts::cells::{CellGrid, Region};
use dpotts::geom::Point;
use dpotts::potentials::{MarkedConfiguration, MarkedPoint, ModelParams};
use dpotts::pseudo_periodic::PseudoPeriodicSpec;
use dpotts::sampler::{birth_acceptance, death_acceptance, pseudo_periodic_setup, ChainState, Schedule};
use dpotts::stats::{batch_mean_ci, poisson_chi_square};
use dpotts::thresholds::{hardcore_ell_window, rho0};

fn corners(min: Point, max: Point, pad: f64) -> MarkedConfiguration {
    let f = |x, y| MarkedPoint { point: Point::new(x, y), mark: 1, frozen: true };
    MarkedConfiguration {
        points: vec![
            f(min.x - pad, min.y - pad),
            f(max.x + pad, min.y - pad),
            f(max.x + pad, max.y + pad),
            f(min.x - pad, max.y + pad),
        ],
    }
}

fn free_params(z: f64, q: u16, beta: f64) -> ModelParams {
    ModelParams { z, q, beta, gamma: 1.0, r: 0.01, big_r: 100.0, alpha0: 0.01, hardcore: false }
}

#[test]
fn poisson_reduction_short() {
    let (min, max) = (Point::new(0.0, 0.0), Point::new(5.0, 4.0));
    let region = Region::Rect { min, max };
    let p = free_params(1.0, 2, 0.0);
    let mut st = ChainState::init(p, region, &corners(min, max, 1.0), &MarkedConfiguration::default(), 7, 0).unwrap();
    let s = Schedule { geometric: 40, move_fraction: 0.1, move_step: 0.5, heatbath: 0, cluster: 0 };
    for _ in 0..200 {
        st.sweep(&s);
    }
    let mut ns = Vec::new();
    for i in 0..3000 {
        let r = st.sweep(&s);
        if i % 5 == 0 {
            ns.push(r.n as u64);
        }
    }
    st.check_invariants().unwrap();
    let chi = poisson_chi_square(&ns, 40.0, 20.0);
    assert!(chi.p_value > 0.001, "{chi:?}");
}

/// Three sites, at most two occupied, q = 2: the discrete analogue of the
/// birth/death kernel satisfies detailed balance for arbitrary energies.
#[test]
fn detailed_balance_on_toy_space() {
    let (z, q, sites) = (0.7f64, 2u16, 3usize);
    // State: occupancy marks per site, 0 = empty.
    let mut states: Vec<[u16; 3]> = Vec::new();
    for a in 0..=q {
        for b in 0..=q {
            for c in 0..=q {
                let s = [a, b, c];
                if s.iter().filter(|&&m| m > 0).count() <= 2 {
                    states.push(s);
                }
            }
        }
    }
    let energy = |s: &[u16; 3]| -> f64 {
        let mut e = 0.0;
        for i in 0..3 {
            e += 0.37 * f64::from(s[i]) * (i as f64 + 1.0);
            for j in 0..i {
                if s[i] > 0 && s[j] > 0 && s[i] != s[j] {
                    e += 0.9;
                }
            }
        }
        e
    };
    let count = |s: &[u16; 3]| s.iter().filter(|&&m| m > 0).count();
    let target: Vec<f64> = states.iter().map(|s| z.powi(count(s) as i32) * (-energy(s)).exp()).collect();
    let idx = |s: &[u16; 3]| states.iter().position(|t| t == s).unwrap();
    let m = states.len();
    let mut kernel = vec![vec![0.0; m]; m];
    for (i, s) in states.iter().enumerate() {
        let n = count(s);
        // Birth with probability 1/2: site uniform, mark uniform.
        for site in 0..sites {
            for mark in 1..=q {
                if s[site] > 0 || n == 2 {
                    continue;
                }
                let mut t = *s;
                t[site] = mark;
                let a = birth_acceptance(z, q, sites as f64, n, energy(&t) - energy(s));
                kernel[i][idx(&t)] += 0.5 / sites as f64 / f64::from(q) * a;
            }
        }
        // Death with probability 1/2: occupied site uniform.
        for site in 0..sites {
            if s[site] == 0 {
                continue;
            }
            let mut t = *s;
            t[site] = 0;
            let a = death_acceptance(z, q, sites as f64, n, energy(&t) - energy(s));
            kernel[i][idx(&t)] += 0.5 / n as f64 * a;
        }
    }
    for i in 0..m {
        for j in 0..m {
            let lhs = target[i] * kernel[i][j];
            let rhs = target[j] * kernel[j][i];
            // Births into a full state are blocked both ways, so the cap at two is harmless.
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs).max(1e-300), "{:?} {:?}", states[i], states[j]);
        }
    }
}

fn pseudo_chain(beta: f64, seed: u64) -> ChainState {
    let (r, big_r, alpha0) = (0.04, 1.0, 0.03);
    let rho = 0.5 * rho0(r, big_r, alpha0).unwrap();
    let ell = hardcore_ell_window(r, big_r, rho).unwrap().midpoint().unwrap();
    let spec = PseudoPeriodicSpec::new(ell, rho).unwrap();
    let grid = CellGrid::new(ell);
    let region = Region::window(grid, 1);
    let p = ModelParams { z: 3.0, q: 2, beta, gamma: 1.0, r, big_r, alpha0, hardcore: true };
    let (b, f) = pseudo_periodic_setup(&p, &spec, &region, seed).unwrap();
    ChainState::init(p, region, &b, &f, seed, 0).unwrap()
}

#[test]
fn pseudo_periodic_init_is_admissible_and_invariants_hold() {
    let mut st = pseudo_chain(0.5, 3);
    assert!(st.admissible());
    assert_eq!(st.num_free(), 9);
    st.check_invariants().unwrap();
    let s = Schedule { geometric: 50, move_fraction: 0.3, move_step: 0.2, heatbath: 1, cluster: 1 };
    for _ in 0..400 {
        let r = st.sweep(&s);
        assert_eq!(r.counts.iter().sum::<usize>(), r.n);
        assert!(st.admissible());
    }
    st.check_invariants().unwrap();
    assert!(st.stats.accepted.iter().all(|&a| a > 0), "{:?}", st.stats);
}

#[test]
fn fixed_seed_reproduces_the_chain() {
    let s = Schedule { geometric: 30, move_fraction: 0.3, move_step: 0.2, heatbath: 1, cluster: 1 };
    let mut a = pseudo_chain(0.5, 11);
    let mut b = pseudo_chain(0.5, 11);
    for _ in 0..50 {
        assert_eq!(a.sweep(&s), b.sweep(&s));
    }
    assert_eq!(a.configuration(), b.configuration());
}

#[test]
fn empty_window_has_only_frozen_points() {
    let grid = CellGrid::new(1.0);
    let region = Region::from_cells(grid, []);
    let p = free_params(1.0, 2, 0.5);
    let b = corners(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0.5);
    let mut st = ChainState::init(p, region, &b, &MarkedConfiguration::default(), 1, 0).unwrap();
    assert_eq!(st.energy().finite, 0.0);
    assert!(!st.step_birth());
    assert!(!st.step_death());
    let r = st.sweep(&Schedule::default());
    assert_eq!(r.n, 0);
}

#[test]
fn heatbath_examples() {
    let (min, max) = (Point::new(0.0, 0.0), Point::new(1.0, 1.0));
    let region = Region::Rect { min, max };
    let b = corners(min, max, 0.2);
    let free = MarkedConfiguration {
        points: vec![MarkedPoint { point: Point::new(0.5, 0.45), mark: 2, frozen: false }],
    };
    // beta = 0: uniform.
    let mut st = ChainState::init(free_params(1.0, 3, 0.0), region.clone(), &b, &free, 1, 0).unwrap();
    let v = st.free_vertices()[0];
    let law = st.heatbath_law(v).unwrap();
    assert!(law.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
    // Every triangle at v has two frozen mark-1 vertices.
    let p = free_params(1.0, 2, 0.4);
    let mut st = ChainState::init(p, region, &b, &free, 1, 0).unwrap();
    let v = st.free_vertices()[0];
    let tri = st.triangulation();
    let s: f64 = tri
        .incident_triangles(v)
        .iter()
        .map(|&t| dpotts::potentials::phi(tri.triangle_metrics(t).area, &p).unwrap())
        .sum();
    let law = st.heatbath_law(v).unwrap();
    let expect = 1.0 / (1.0 + (-s).exp());
    assert!((law[0] - expect).abs() < 1e-14, "{law:?} vs {expect}");
    assert!(matches!(st.step_mark_heatbath(dpotts::delaunay::VertexId(0)), Err(dpotts::sampler::SamplerError::Frozen(_))));
}

#[test]
fn dominance_vanishes_at_beta_zero() {
    let (min, max) = (Point::new(0.0, 0.0), Point::new(4.0, 4.0));
    let region = Region::Rect { min, max };
    let mut st =
        ChainState::init(free_params(2.0, 2, 0.0), region, &corners(min, max, 1.0), &MarkedConfiguration::default(), 5, 0)
            .unwrap();
    let s = Schedule { geometric: 20, move_fraction: 0.2, move_step: 0.5, heatbath: 1, cluster: 0 };
    for _ in 0..200 {
        st.sweep(&s);
    }
    let xs: Vec<f64> = (0..4000).map(|_| st.sweep(&s).dominance_ratio()).collect();
    let ci = batch_mean_ci(&xs, 20);
    assert!(ci.mean.abs() <= ci.half_width, "{ci:?}");
}
