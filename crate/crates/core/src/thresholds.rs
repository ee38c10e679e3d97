//! Closed-form parameter windows, activity / coupling lower bounds and packing constants.
//!
//! All formulas are for the `gamma = 1` type potential. The percolation
//! threshold of site percolation on `Z^2` enters through `epsilon`; its
//! default value [`P_C_SITE_DEFAULT`] is an external numerical constant and
//! can be replaced by an estimate from [`crate::site_bond`].

use crate::potentials::ModelParams;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Site percolation threshold on `Z^2` (literature value).
pub const P_C_SITE_DEFAULT: f64 = 0.592746;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
}

fn domain<T>(msg: &str) -> Result<T, ThresholdError> {
    Err(ThresholdError::Domain(msg.to_string()))
}

fn check_rho(rho: f64) -> Result<(), ThresholdError> {
    if !(0.0..1.0 / 6.0).contains(&rho) {
        return domain("rho must lie in [0, 1/6)");
    }
    Ok(())
}

fn check_hardcore(r: f64, big_r: f64, alpha0: f64) -> Result<(), ThresholdError> {
    if !(r > 0.0 && r <= big_r && big_r.is_finite()) {
        return domain("need 0 < r <= R < inf");
    }
    if !(alpha0 > 0.0 && alpha0 < PI / 3.0) {
        return domain("alpha0 must lie in (0, pi/3)");
    }
    Ok(())
}

pub fn l_of_rho(rho: f64) -> Result<f64, ThresholdError> {
    check_rho(rho)?;
    Ok((1.0 - 6.0 * rho) / SQRT3)
}

pub fn u_of_rho(rho: f64) -> Result<f64, ThresholdError> {
    check_rho(rho)?;
    let a = 1.0 + 6.0 * rho;
    let b = 1.0 - 6.0 * rho;
    Ok(a * a * a / (SQRT3 * b * b))
}

pub fn rho0(r: f64, big_r: f64, alpha0: f64) -> Result<f64, ThresholdError> {
    check_hardcore(r, big_r, alpha0)?;
    let (cr, cbr) = (r.cbrt(), big_r.cbrt());
    let t1 = (cbr - cr) / (6.0 * (cbr + cr));
    let c = alpha0.cos();
    let s = 1.0 - (0.5 + c).sqrt();
    let t2 = s * s / (2.0 * c - 1.0);
    Ok(t1.min(t2))
}

/// Lower bound on triangle area used by the summability constant,
/// `ell^2 sqrt(3 (1 - 2 rho) (1 - 6 rho)^3)`.
fn area_term(ell: f64, rho: f64) -> f64 {
    let b = 1.0 - 6.0 * rho;
    ell * ell * (3.0 * (1.0 - 2.0 * rho) * b * b * b).sqrt()
}

pub fn z0_prime(beta: f64, rho: f64, ell: f64) -> Result<f64, ThresholdError> {
    if !(rho > 0.0 && rho < 1.0 / 6.0) || !(ell > 0.0) || !(beta >= 0.0) {
        return domain("need rho in (0, 1/6), ell > 0, beta >= 0");
    }
    let f = 1.0 + beta / area_term(ell, rho);
    Ok(f * f / (PI * rho * rho * ell * ell))
}

pub fn epsilon(p_c: f64) -> Result<f64, ThresholdError> {
    if !(p_c > 0.0 && p_c < 1.0) {
        return domain("p_c must lie in (0, 1)");
    }
    Ok((1.0 - p_c) / 2.0)
}

fn reach(r: f64, big_r: f64, alpha0: f64) -> f64 {
    r.max(big_r * alpha0.sin())
}

pub fn z0_doubleprime(ell: f64, q: u16, r: f64, big_r: f64, alpha0: f64, p_c: f64) -> Result<f64, ThresholdError> {
    check_hardcore(r, big_r, alpha0)?;
    let eps = epsilon(p_c)?;
    let d = ell / 8.0 - 8.0 / SQRT3 * reach(r, big_r, alpha0);
    if !(d > 0.0) {
        return domain("ell / 8 must exceed (8 / sqrt 3)(r v R sin alpha0)");
    }
    let expo = 2.0 * PI / alpha0 - 1.0;
    Ok(64.0 * f64::from(q).powf(expo) / (eps * d * d))
}

pub fn m_pack(ell: f64, r: f64, alpha0: f64) -> f64 {
    let x = ell / (r * alpha0.sin()) + 2.0;
    x * x
}

/// `(3 sqrt 3 / 4) q^2 R^2 / ((1 - eps)^(-1/m) - 1)` for explicit `m`, `eps`.
pub fn beta0_prime_from(m: f64, eps: f64, q: u16, big_r: f64) -> Result<f64, ThresholdError> {
    if !(m >= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return domain("need m >= 1 and eps in (0, 1)");
    }
    let qf = f64::from(q);
    // expm1 keeps the tiny denominator accurate for large m.
    let denom = (-(-eps).ln_1p() / m).exp_m1();
    Ok(0.75 * SQRT3 * qf * qf * big_r * big_r / denom)
}

pub fn beta0_prime(ell: f64, q: u16, big_r: f64, r: f64, alpha0: f64, p_c: f64) -> Result<f64, ThresholdError> {
    check_hardcore(r, big_r, alpha0)?;
    beta0_prime_from(m_pack(ell, r, alpha0), epsilon(p_c)?, q, big_r)
}

pub fn p_hat(beta: f64, q: u16, big_r: f64) -> Result<f64, ThresholdError> {
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    let qf = f64::from(q);
    Ok(1.0 / (0.75 * SQRT3 / beta * qf * qf * big_r * big_r + 1.0))
}

pub fn c_gamma_bound(beta: f64, ell: f64, rho: f64) -> Result<f64, ThresholdError> {
    if !(rho > 0.0 && rho < 1.0 / 6.0) || !(ell > 0.0) || !(beta >= 0.0) {
        return domain("need rho in (0, 1/6), ell > 0, beta >= 0");
    }
    Ok(2.0 * (beta / area_term(ell, rho)).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn midpoint(&self) -> Option<f64> {
        (!self.is_empty()).then(|| 0.5 * (self.lo + self.hi))
    }
}

/// Cell sides for which pseudo-periodic configurations satisfy both hardcores:
/// `(r / L(rho), R / U(rho))`.
pub fn hardcore_ell_window(r: f64, big_r: f64, rho: f64) -> Result<Interval, ThresholdError> {
    Ok(Interval { lo: r / l_of_rho(rho)?, hi: big_r / u_of_rho(rho)? })
}

/// `I_0`: the hardcore window intersected with `((64/sqrt3)(r v R sin alpha0), sqrt3 R)`.
pub fn ell_interval(r: f64, big_r: f64, alpha0: f64, rho: f64) -> Result<Interval, ThresholdError> {
    check_hardcore(r, big_r, alpha0)?;
    let w = hardcore_ell_window(r, big_r, rho)?;
    Ok(Interval {
        lo: w.lo.max(64.0 / SQRT3 * reach(r, big_r, alpha0)),
        hi: w.hi.min(SQRT3 * big_r),
    })
}

/// Supremum of `rho` with nonempty `I_0`, by bisection to `1e-9`. Zero if
/// `I_0` is empty already at `rho = 0`.
pub fn rho0_prime(r: f64, big_r: f64, alpha0: f64) -> Result<f64, ThresholdError> {
    check_hardcore(r, big_r, alpha0)?;
    if ell_interval(r, big_r, alpha0, 0.0)?.is_empty() {
        return Ok(0.0);
    }
    // L decreases and U increases in rho, so nonemptiness is monotone.
    let (mut lo, mut hi) = (0.0, 1.0 / 6.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ell_interval(r, big_r, alpha0, mid)?.is_empty() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Which hypotheses of the phase-transition regime hold for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCheck {
    /// `alpha0 < asin(3/64)`.
    pub alpha0_small: bool,
    /// `64 r < 3 R`.
    pub r_small: bool,
    pub rho_below_rho0_prime: bool,
    pub ell_in_i0: bool,
    pub z_above_threshold: bool,
    pub beta_above_threshold: bool,
}

impl RegimeCheck {
    pub fn geometric(&self) -> bool {
        self.alpha0_small && self.r_small && self.rho_below_rho0_prime && self.ell_in_i0
    }

    pub fn all(&self) -> bool {
        self.geometric() && self.z_above_threshold && self.beta_above_threshold
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let items = [
            (self.alpha0_small, "alpha0 >= asin(3/64)"),
            (self.r_small, "64 r >= 3 R"),
            (self.rho_below_rho0_prime, "rho >= rho0'"),
            (self.ell_in_i0, "ell outside I_0"),
            (self.z_above_threshold, "z below z0'' v z0'/q"),
            (self.beta_above_threshold, "beta below beta0'"),
        ];
        for (ok, msg) in items {
            if !ok {
                w.push(msg.to_string());
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub rho0: f64,
    pub rho0_prime: f64,
    pub l_rho: f64,
    pub u_rho: f64,
    pub ell_interval: Interval,
    pub epsilon: f64,
    pub m_pack: f64,
    /// `None` when the formula's domain is violated or `gamma != 1`.
    pub z0_prime: Option<f64>,
    pub z0_doubleprime: Option<f64>,
    pub beta0_prime: Option<f64>,
    pub p_hat: Option<f64>,
    pub c_gamma_bound: Option<f64>,
    pub regime: RegimeCheck,
}

pub fn report(p: &ModelParams, ell: f64, rho: f64, p_c: f64) -> Result<ThresholdReport, ThresholdError> {
    let g1 = p.gamma == 1.0;
    let gate = |v: Result<f64, ThresholdError>| if g1 { v.ok() } else { None };
    let rho0p = rho0_prime(p.r, p.big_r, p.alpha0)?;
    let i0 = ell_interval(p.r, p.big_r, p.alpha0, rho)?;
    let z0p = gate(z0_prime(p.beta, rho, ell));
    let z0pp = z0_doubleprime(ell, p.q, p.r, p.big_r, p.alpha0, p_c).ok();
    let b0 = gate(beta0_prime(ell, p.q, p.big_r, p.r, p.alpha0, p_c));
    let z_ok = match (z0pp, z0p) {
        (Some(a), Some(b)) => p.z > a.max(b / f64::from(p.q)),
        _ => false,
    };
    let regime = RegimeCheck {
        alpha0_small: p.alpha0 < (3.0f64 / 64.0).asin(),
        r_small: 64.0 * p.r < 3.0 * p.big_r,
        rho_below_rho0_prime: rho < rho0p,
        ell_in_i0: i0.contains(ell),
        z_above_threshold: z_ok,
        beta_above_threshold: b0.is_some_and(|b| p.beta > b),
    };
    Ok(ThresholdReport {
        rho0: rho0(p.r, p.big_r, p.alpha0)?,
        rho0_prime: rho0p,
        l_rho: l_of_rho(rho)?,
        u_rho: u_of_rho(rho)?,
        ell_interval: i0,
        epsilon: epsilon(p_c)?,
        m_pack: m_pack(ell, p.r, p.alpha0),
        z0_prime: z0p,
        z0_doubleprime: z0pp,
        beta0_prime: b0,
        p_hat: gate(p_hat(p.beta, p.q, p.big_r)),
        c_gamma_bound: gate(c_gamma_bound(p.beta, ell, rho)),
        regime,
    })
}

impl ThresholdReport {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("unavailable".to_string(), |x| format!("{x:.17e}"));
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("rho0", format!("{:.17e}", self.rho0));
        line("rho0_prime", format!("{:.17e}", self.rho0_prime));
        line("L_rho", format!("{:.17e}", self.l_rho));
        line("U_rho", format!("{:.17e}", self.u_rho));
        if self.ell_interval.is_empty() {
            line("ell_interval", "empty".into());
        } else {
            line("ell_interval", format!("({:.17e}, {:.17e})", self.ell_interval.lo, self.ell_interval.hi));
        }
        line("epsilon", format!("{:.17e}", self.epsilon));
        line("m_pack", format!("{:.17e}", self.m_pack));
        line("z0_prime", opt(self.z0_prime));
        line("z0_doubleprime", opt(self.z0_doubleprime));
        line("beta0_prime", opt(self.beta0_prime));
        line("p_hat", opt(self.p_hat));
        line("c_gamma_bound", opt(self.c_gamma_bound));
        line("regime_geometric", self.regime.geometric().to_string());
        line("regime_all", self.regime.all().to_string());
        for w in self.regime.warnings() {
            line("warning", w);
        }
        s
    }
}
