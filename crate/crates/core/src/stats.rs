//! Small statistics helpers for the checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    /// 95% half-width from batch means.
    pub half_width: f64,
    pub n: usize,
}

/// Mean with a 95% half-width from `batches` batch means (correlated series).
pub fn batch_mean_ci(xs: &[f64], batches: usize) -> MeanCi {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let b = batches.clamp(2, n.max(2));
    let size = n / b;
    if size == 0 {
        return MeanCi { mean, half_width: f64::INFINITY, n };
    }
    let means: Vec<f64> = (0..b).map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b as f64 - 1.0);
    MeanCi { mean, half_width: 1.96 * (var / b as f64).sqrt(), n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Goodness of fit of integer samples against Poisson(`mean`); bins are merged
/// until each expects at least `min_expected` counts.
pub fn poisson_chi_square(samples: &[u64], mean: f64, min_expected: f64) -> ChiSquare {
    let dist = Poisson::new(mean).expect("positive mean");
    let total = samples.len() as f64;
    let max = samples.iter().copied().max().unwrap_or(0).max((mean * 3.0) as u64 + 10);
    // Bin edges [lo, hi] in k with expected >= min_expected; the last bin takes the tail.
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let mut lo = 0u64;
    let mut acc = 0.0;
    for k in 0..=max {
        acc += dist.pmf(k) * total;
        if acc >= min_expected && total * dist.sf(k) >= min_expected {
            edges.push((lo, k));
            lo = k + 1;
            acc = 0.0;
        }
    }
    edges.push((lo, u64::MAX));
    let mut observed = vec![0f64; edges.len()];
    for &s in samples {
        let i = edges.partition_point(|&(_, hi)| hi < s);
        observed[i] += 1.0;
    }
    let mut stat = 0.0;
    for (i, &(lo, hi)) in edges.iter().enumerate() {
        let below = if lo == 0 { 0.0 } else { dist.cdf(lo - 1) };
        let upto = if hi == u64::MAX { 1.0 } else { dist.cdf(hi) };
        let e = (upto - below) * total;
        stat += (observed[i] - e).powi(2) / e;
    }
    let dof = edges.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("dof >= 1").sf(stat);
    ChiSquare { statistic: stat, dof, p_value }
}

/// Empirical law of indices `0..k`.
pub fn empirical(counts: &[u64]) -> Vec<f64> {
    let s: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / s as f64).collect()
}
