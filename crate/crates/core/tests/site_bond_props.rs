use dpotts::rng::substream;
use dpotts::site_bond::{
    bits, check_coupling, connect_prob, connect_prob_many, crossing_curve, crossing_threshold, sample, window_config_from_bits,
    write_estimates_csv, CouplingM, LatticeConfig, LatticeUniforms, ProductMeasure, SiteBondParams, TableMeasure,
};
use proptest::prelude::*;
use std::collections::{BTreeSet, VecDeque};

fn sb(p: f64, pp: f64) -> SiteBondParams {
    SiteBondParams::new(p, pp).unwrap()
}

/// Origin cluster by explicit coordinates, independent of the index layout.
fn flood(cfg: &LatticeConfig, use_bonds: bool) -> BTreeSet<(i64, i64)> {
    let n = cfg.n;
    let open = |x: i64, y: i64| cfg.sites[cfg.index(x, y)];
    let bond = |a: (i64, i64), b: (i64, i64)| {
        if !use_bonds {
            return true;
        }
        let (lo, hi) = if (a.0, a.1) < (b.0, b.1) { (a, b) } else { (b, a) };
        if hi.0 == lo.0 + 1 {
            cfg.right[cfg.index(lo.0, lo.1)]
        } else {
            cfg.up[cfg.index(lo.0, lo.1)]
        }
    };
    let mut seen = BTreeSet::new();
    if !open(0, 0) {
        return seen;
    }
    seen.insert((0, 0));
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    while let Some(a) = queue.pop_front() {
        for d in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let b = (a.0 + d.0, a.1 + d.1);
            if b.0.abs() <= n && b.1.abs() <= n && open(b.0, b.1) && bond(a, b) && seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clusters_match_flood_fill(seed in any::<u64>(), n in 1i64..12, p in 0.3f64..0.9, pp in 0.3f64..1.0) {
        let cfg = sample(&sb(p, pp), n, seed);
        let to_set = |v: Vec<usize>| v.into_iter().map(|i| cfg.coords(i)).collect::<BTreeSet<_>>();
        let open = to_set(cfg.open_cluster());
        let site = to_set(cfg.site_cluster());
        prop_assert_eq!(&open, &flood(&cfg, true));
        prop_assert_eq!(&site, &flood(&cfg, false));
        prop_assert!(open.is_subset(&site));
        prop_assert_eq!(open.contains(&(0, 0)), cfg.sites[cfg.origin()]);
        let touches = open.iter().any(|&(x, y)| x.abs() == n || y.abs() == n);
        prop_assert_eq!(cfg.origin_connected(), touches);
    }

    #[test]
    fn shared_uniforms_are_monotone(seed in any::<u64>(), n in 1i64..10, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
        let (p1, p2) = (a.min(b), a.max(b));
        let (q1, q2) = (c.min(d), c.max(d));
        let u = LatticeUniforms::draw(n, &mut substream(seed, &[1]));
        let lo = u.config(&sb(p1, q1));
        let hi = u.config(&sb(p2, q2));
        for i in 0..lo.sites.len() {
            prop_assert!(!lo.sites[i] || hi.sites[i]);
            prop_assert!(!lo.right[i] || hi.right[i]);
            prop_assert!(!lo.up[i] || hi.up[i]);
        }
        let cl: BTreeSet<usize> = hi.open_cluster().into_iter().collect();
        prop_assert!(lo.open_cluster().iter().all(|i| cl.contains(i)));
        prop_assert!(!lo.origin_connected() || hi.origin_connected());
    }
}

#[test]
fn sample_examples() {
    let all = sample(&sb(1.0, 1.0), 2, 3);
    assert!(all.sites.iter().all(|&b| b));
    assert_eq!(all.open_cluster().len(), 25);
    let none = sample(&sb(0.0, 1.0), 4, 3);
    assert!(none.open_cluster().is_empty());
    assert_eq!(sample(&sb(0.6, 0.7), 5, 9), sample(&sb(0.6, 0.7), 5, 9));
    assert!(SiteBondParams::new(1.1, 0.5).is_err());
    assert!(SiteBondParams::new(0.5, -0.1).is_err());
}

#[test]
fn site_fraction_within_three_sigma() {
    let p = 0.37;
    let n = 500;
    let cfg = sample(&sb(p, 1.0), n, 12);
    let m = cfg.sites.len();
    assert!(m >= 1_000_000);
    let f = cfg.sites.iter().filter(|&&b| b).count() as f64 / m as f64;
    assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / m as f64).sqrt(), "{f}");
}

#[test]
fn connect_prob_examples() {
    let e = connect_prob(&sb(1.0, 1.0), 8, 50, 1);
    assert_eq!((e.estimate, e.ci_hi), (1.0, 1.0));
    let e = connect_prob(&sb(0.0, 1.0), 8, 50, 1);
    assert_eq!((e.estimate, e.ci_lo), (0.0, 0.0));
    let e = connect_prob(&sb(0.7, 1.0), 64, 300, 2);
    assert!(e.estimate > 0.0 && e.ci_lo > 0.0, "{e:?}");
    assert!(e.ci_lo <= e.estimate && e.estimate <= e.ci_hi);
}

#[test]
fn connect_prob_many_is_monotone_with_common_numbers() {
    let ps: Vec<SiteBondParams> = [0.5, 0.6, 0.7, 0.8, 0.9].iter().map(|&p| sb(p, 0.9)).collect();
    let est = connect_prob_many(&ps, 12, 400, 5);
    assert!(est.windows(2).all(|w| w[0].successes <= w[1].successes), "{est:?}");
    let mut buf = Vec::new();
    write_estimates_csv(&est, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("p,p_prime,n,estimate,ci_lo,ci_hi"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn crossing_curves_are_monotone_and_sharpen() {
    let mut slopes = Vec::new();
    for l in [8usize, 32] {
        let mut rng = substream(6, &[l as u64]);
        let th: Vec<usize> = (0..300).map(|_| crossing_threshold(l, &mut rng)).collect();
        let sites = l * l;
        let grid: Vec<f64> = (0..=40).map(|i| 0.4 + 0.01 * i as f64).collect();
        let curve: Vec<f64> = grid.iter().map(|&p| crossing_curve(&th, sites, p)).collect();
        assert!(curve.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{curve:?}");
        // Steepness between the 0.5 +- 0.05 points around the crossing.
        slopes.push(curve[24] - curve[14]);
    }
    assert!(slopes[1] > slopes[0], "{slopes:?}");
}

#[test]
fn coupling_with_product_measure_is_diagonal() {
    let prod = ProductMeasure { probs: vec![0.4; 9] };
    let c = CouplingM::new(&prod, 0.4).unwrap();
    let mut rng = substream(1, &[2]);
    for _ in 0..200 {
        let (a, b) = c.sample(&mut rng).unwrap();
        assert_eq!(a, b);
    }
    let table = TableMeasure::from_fn(9, |s| s.iter().map(|&b| if b { 0.4 } else { 0.6 }).product());
    let chk = check_coupling(&table, 0.4).unwrap();
    assert!(chk.first_marginal_error < 1e-12 && chk.second_marginal_error < 1e-12 && chk.monotone);
}

#[test]
fn coupling_above_p_keeps_product_second_marginal() {
    // Product of Bernoulli(p + 0.1): conditionals are p + 0.1 everywhere.
    let p = 0.45;
    let table = TableMeasure::from_fn(9, |s| s.iter().map(|&b| if b { p + 0.1 } else { 0.9 - p }).product());
    let chk = check_coupling(&table, p).unwrap();
    assert!(chk.first_marginal_error < 1e-12, "{chk:?}");
    assert!(chk.second_marginal_error < 1e-12, "{chk:?}");
    assert!(chk.monotone);
}

#[test]
fn coupling_rejects_low_conditionals() {
    let table = TableMeasure::from_fn(4, |s| s.iter().map(|&b| if b { 0.3 } else { 0.7 }).product());
    assert!(check_coupling(&table, 0.5).is_err());
}

#[test]
fn dominating_measure_wins_on_crossing() {
    // Ferromagnetic 3x3 table with all site conditionals above p.
    let n = 1;
    let m = 9;
    let table = TableMeasure::from_fn(m, |s| {
        let ones = s.iter().filter(|&&b| b).count() as f64;
        let agree = (0..m)
            .flat_map(|i| [(i, i + 1), (i, i + 3)])
            .filter(|&(i, j)| j < m && (j != i + 1 || j % 3 != 0))
            .filter(|&(i, j)| s[i] == s[j])
            .count() as f64;
        (0.8 * ones + 0.4 * agree).exp()
    });
    let pmin = (0..1usize << m)
        .flat_map(|a| {
            let b = bits(a, m);
            (0..m).map(move |i| (i, b.clone()))
        })
        .map(|(i, b)| dpotts::site_bond::SiteMeasure::conditional(&table, i, &b))
        .fold(1.0, f64::min);
    let p = pmin.min(0.9);
    let crossing = |probs: &dyn Fn(usize) -> f64| -> f64 {
        (0..1usize << m).map(|a| probs(a) * f64::from(u8::from(window_config_from_bits(n, a).origin_connected()))).sum()
    };
    let product = |a: usize| -> f64 { bits(a, m).iter().map(|&b| if b { p } else { 1.0 - p }).product() };
    let first = crossing(&|a| table.probs[a]);
    let second = crossing(&product);
    assert!(first + 1e-12 >= second, "{first} < {second}");
    let mut rng = substream(2, &[3]);
    let c = CouplingM::new(&table, p).unwrap();
    for _ in 0..500 {
        let (a, b) = c.sample(&mut rng).unwrap();
        assert!(a.iter().zip(&b).all(|(&x, &y)| x || !y));
    }
}
