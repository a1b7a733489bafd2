//! Closed-form and semi-analytic quantities.
//!
//! All probabilities are handled as natural logarithms; binomial tails at
//! `n ~ 10^3` underflow any linear scale.

mod rho;

pub use rho::{collision_lower_bounds, collision_rho, RhoEstimate, RhoOptions};

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::counting::threshold;
use crate::error::{LppError, Result};
use crate::lattice::GraphMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnealedParams {
    pub p: f64,
    pub mode: GraphMode,
}

impl AnnealedParams {
    pub fn new(p: f64, mode: GraphMode) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LppError::Domain(format!("p must lie in (0,1), got {p}")));
        }
        mode.validate()?;
        Ok(AnnealedParams { p, mode })
    }

    pub fn semi(p: f64, d: usize) -> Result<Self> {
        AnnealedParams::new(p, GraphMode::semi(d))
    }

    pub fn d(&self) -> usize {
        self.mode.dim()
    }

    pub fn out_degree(&self) -> f64 {
        self.mode.out_degree() as f64
    }
}

/// `ln φ(α)`. Constant `ln(out_degree)` below `p`; `-inf` above 1.
pub fn ln_phi(alpha: f64, params: &AnnealedParams) -> f64 {
    let p = params.p;
    let ln_deg = params.out_degree().ln();
    if alpha <= p {
        return ln_deg;
    }
    if alpha > 1.0 {
        return f64::NEG_INFINITY;
    }
    let good = alpha * (p / alpha).ln();
    let bad = if alpha == 1.0 {
        0.0
    } else {
        (1.0 - alpha) * ((1.0 - p) / (1.0 - alpha)).ln()
    };
    ln_deg + good + bad
}

/// Annealed growth rate `lim (E N_n(α))^{1/n}`.
pub fn phi(alpha: f64, params: &AnnealedParams) -> f64 {
    if alpha <= params.p {
        return params.out_degree();
    }
    ln_phi(alpha, params).exp()
}

/// `ln P{Bin(n, p) >= kmin}`: 0 for `kmin = 0`, `-inf` for `kmin > n`.
pub fn binomial_tail(n: u64, kmin: u64, p: f64) -> f64 {
    if kmin == 0 {
        return 0.0;
    }
    if kmin > n {
        return f64::NEG_INFINITY;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (kmin..=n)
        .map(|k| ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq)
        .collect();
    log_sum_exp(&terms)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln E N_n(α) = n ln(out_degree) + ln P{Bin(n,p) >= ⌈α n⌉}`.
pub fn expected_n_ln(n: usize, alpha: f64, params: &AnnealedParams) -> f64 {
    let k = threshold(alpha.max(0.0), n) as u64;
    n as f64 * params.out_degree().ln() + binomial_tail(n as u64, k, params.p)
}

/// Small-`p` heuristic `log(out_degree) / log(1/p)`.
pub fn alpha_one(params: &AnnealedParams) -> Result<f64> {
    let denom = (1.0 / params.p).ln();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(LppError::Domain(format!("log(1/p) must be positive, p = {}", params.p)));
    }
    Ok(params.out_degree().ln() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    /// `φ(root) = 1` with `p < root < 1`.
    Interior,
    /// `φ(1) >= 1`: `φ` never drops below 1 on `[p, 1]`; the value is 1.
    AtOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhiRoot {
    pub alpha: f64,
    pub status: RootStatus,
}

/// The `α` in `[p, 1]` where `φ(α) = 1`, by bisection.
pub fn phi_root(params: &AnnealedParams) -> PhiRoot {
    if ln_phi(1.0, params) >= 0.0 {
        return PhiRoot {
            alpha: 1.0,
            status: RootStatus::AtOne,
        };
    }
    let (mut lo, mut hi) = (params.p, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid, params) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PhiRoot {
        alpha: 0.5 * (lo + hi),
        status: RootStatus::Interior,
    }
}

/// `Σ_{1 <= k <= βn} ρ^k P{T_{n-k} >= αn - k} / P{T_n >= αn}` with
/// `T_m ~ Bin(m, p)`.
pub fn second_moment_sum(n: usize, alpha: f64, beta: f64, rho: f64, params: &AnnealedParams) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(LppError::Domain(format!("beta must lie in (0,1], got {beta}")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(LppError::Domain(format!("rho must lie in [0,1), got {rho}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LppError::Domain(format!("alpha must lie in [0,1], got {alpha}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let kmin_n = threshold(alpha, n);
    let denom = binomial_tail(n as u64, kmin_n as u64, params.p);
    let kmax = floor_snapped(beta * n as f64).min(n);
    let ln_rho = rho.ln();
    let mut total = 0.0;
    for k in 1..=kmax {
        let num = binomial_tail((n - k) as u64, kmin_n.saturating_sub(k) as u64, params.p);
        total += (k as f64 * ln_rho + num - denom).exp();
    }
    Ok(total)
}

fn floor_snapped(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}
