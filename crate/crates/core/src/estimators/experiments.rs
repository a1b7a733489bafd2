use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stats::{linear_fit, LinearFit, Z95};
use super::{assemble, run_reps, ExperimentConfig, ExperimentResult, Observation, RepRecord};
use crate::counting::{
    interchange_family, max_weight_path, max_weight_profile, run_counts, threshold, CountValue, DpOptions,
    Geometry, InterchangeReport,
};
use crate::error::{LppError, Result};
use crate::lattice::{path_weight, Environment, PathRecord, Step, Vertex};

/// The path moving along `+e_1` for `n` steps from the origin.
pub fn straight_path(env: &Environment, n: usize) -> PathRecord {
    PathRecord::new(Vertex::origin(env.mode().dim()), vec![Step::new(1, 1); n])
}

/// Per replication: `max_weight(n)/n` and the straight-path density at
/// every `n` of the grid.
pub fn estimate_m(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = Instant::now();
    let n_max = cfg.n_max();
    let geom = Geometry::build(cfg.params.mode, n_max);
    let recs = run_reps(cfg, |rep, env| {
        let start = Vertex::origin(env.mode().dim());
        let profile = max_weight_profile(env, &start, n_max, &geom, cfg.memory_budget)?;
        let straight = straight_path(env, n_max);
        let mut obs = Vec::new();
        for &n in &cfg.n_grid {
            let density = |w: u64| if n == 0 { None } else { Some(w as f64 / n as f64) };
            let s = PathRecord::new(start.clone(), straight.steps[..n].to_vec());
            obs.push(Observation::new(n, None, "max_density", density(profile[n])));
            obs.push(Observation::new(n, None, "straight_density", density(path_weight(&s, env)?)));
        }
        Ok(RepRecord {
            rep,
            seed: cfg.rep_seed(rep),
            observations: obs,
        })
    })?;
    Ok(assemble("estimate_m", cfg, recs, None, started))
}

fn count_options(cfg: &ExperimentConfig, k_cap: usize) -> DpOptions {
    DpOptions {
        backend: cfg.backend,
        k_cap: Some(k_cap),
        memory_budget: cfg.memory_budget,
        keep_history: false,
    }
}

/// `N_n(α)` for every `(n, α)` of the grid, from one DP per replication.
fn grid_counts(cfg: &ExperimentConfig, env: &Environment, geom: &Geometry) -> Result<Vec<(usize, f64, CountValue)>> {
    let n_max = cfg.n_max();
    let cap = cfg.n_grid.iter().flat_map(|&n| cfg.alpha_grid.iter().map(move |&a| threshold(a, n))).max().unwrap_or(0);
    let opts = count_options(cfg, cap.min(n_max));
    let start = Vertex::origin(env.mode().dim());
    let mut out = Vec::new();
    let mut next = 0;
    run_counts(env, &start, n_max, &opts, geom, |layer| {
        let t = layer.level();
        if next < cfg.n_grid.len() && cfg.n_grid[next] == t {
            for &a in &cfg.alpha_grid {
                out.push((t, a, layer.at_least(threshold(a, t))?));
            }
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

fn check_unit_alphas(cfg: &ExperimentConfig) -> Result<()> {
    if let Some(a) = cfg.alpha_grid.iter().find(|a| **a > 1.0) {
        return Err(LppError::Domain(format!("alpha must lie in [0,1], got {a}")));
    }
    Ok(())
}

/// Per replication and `(n, α)`: `count` (`N_n(α)`), `root`
/// (`N_n^{1/n}`, 0 when `N_n = 0`) and `log_rate` (`ln N_n / n`, only when
/// `N_n > 0`). Zero fractions are reported per cell.
pub fn estimate_lambda(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    check_unit_alphas(cfg)?;
    let started = Instant::now();
    let geom = Geometry::build(cfg.params.mode, cfg.n_max());
    let recs = run_reps(cfg, |rep, env| {
        let mut obs = Vec::new();
        for (n, a, c) in grid_counts(cfg, env, &geom)? {
            let log_rate = (!c.is_zero() && n > 0).then(|| c.ln() / n as f64);
            obs.push(Observation::new(n, Some(a), "count", Some(c.to_f64())));
            obs.push(Observation::new(n, Some(a), "root", Some(c.root(n))));
            obs.push(Observation::new(n, Some(a), "log_rate", log_rate));
        }
        Ok(RepRecord {
            rep,
            seed: cfg.rep_seed(rep),
            observations: obs,
        })
    })?;
    Ok(assemble("estimate_lambda", cfg, recs, Some("count"), started))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZeroRow {
    pub t: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZeroCurve {
    pub alpha: f64,
    /// `α < MHat - ε`.
    pub precondition_met: bool,
    pub rows: Vec<ZeroRow>,
    /// Fit of `ln frequency` against `t` over the nonzero frequencies.
    pub fit: Option<LinearFit>,
    pub strictly_decreasing: bool,
    /// Strictly decreasing frequencies with a negative fitted slope.
    pub decay_confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZeroProbReport {
    pub result: ExperimentResult,
    /// `max_weight(t_max)/t_max`, averaged over replications.
    pub m_hat: f64,
    pub epsilon: f64,
    pub curves: Vec<ZeroCurve>,
}

/// Empirical `P{N_t(α) = 0}` over the `t` grid (`cfg.n_grid`).
///
/// `N_t(α) = 0` exactly when `max_weight(t) < ⌈α t⌉`, so one max-weight DP
/// per replication serves every `(t, α)`. The margin is `ε = 0.05 MHat`.
pub fn prob_n_zero(cfg: &ExperimentConfig) -> Result<ZeroProbReport> {
    cfg.validate()?;
    let started = Instant::now();
    let t_max = cfg.n_max();
    let geom = Geometry::build(cfg.params.mode, t_max);
    let recs = run_reps(cfg, |rep, env| {
        let start = Vertex::origin(env.mode().dim());
        let profile = max_weight_profile(env, &start, t_max, &geom, cfg.memory_budget)?;
        let mut obs = Vec::new();
        for &t in &cfg.n_grid {
            for &a in &cfg.alpha_grid {
                let zero = (profile[t] as usize) < threshold(a, t);
                obs.push(Observation::new(t, Some(a), "zero", Some(zero as u8 as f64)));
            }
        }
        let density = (t_max > 0).then(|| profile[t_max] as f64 / t_max as f64);
        obs.push(Observation::new(t_max, None, "max_density", density));
        Ok(RepRecord {
            rep,
            seed: cfg.rep_seed(rep),
            observations: obs,
        })
    })?;
    let result = assemble("prob_n_zero", cfg, recs, None, started);
    let m_hat = result
        .aggregate(t_max, None, "max_density")
        .map(|a| a.summary.mean)
        .unwrap_or(f64::NAN);
    let epsilon = 0.05 * m_hat;
    let curves = cfg
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let rows: Vec<ZeroRow> = cfg
                .n_grid
                .iter()
                .map(|&t| {
                    let s = result.aggregate(t, Some(alpha), "zero").unwrap().summary;
                    ZeroRow {
                        t,
                        frequency: s.mean,
                        ci_low: s.ci_low.max(0.0),
                        ci_high: s.ci_high.min(1.0),
                    }
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.frequency > 0.0)
                .map(|r| (r.t as f64, r.frequency.ln()))
                .unzip();
            let fit = linear_fit(&xs, &ys);
            let strictly_decreasing = rows.windows(2).all(|w| w[1].frequency < w[0].frequency);
            let decay_confirmed = strictly_decreasing && fit.as_ref().is_some_and(|f| f.slope < 0.0);
            ZeroCurve {
                alpha,
                precondition_met: alpha < m_hat - epsilon,
                rows,
                fit,
                strictly_decreasing,
                decay_confirmed,
            }
        })
        .collect();
    Ok(ZeroProbReport {
        result,
        m_hat,
        epsilon,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RatioRow {
    pub n: usize,
    pub alpha: f64,
    /// `E N / s` and `E N^2 / s^2` for the scale `s` = largest observed `N`.
    pub scaled_mean: f64,
    pub scaled_second_moment: f64,
    pub ln_scale: f64,
    /// `E N^2 / (E N)^2`; `None` when every replication has `N = 0`.
    pub ratio: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SecondMomentReport {
    pub result: ExperimentResult,
    /// Every `α` of the grid satisfies `α >= p`.
    pub alpha_at_least_p: bool,
    pub rows: Vec<RatioRow>,
}

impl SecondMomentReport {
    pub fn row(&self, n: usize, alpha: f64) -> Option<&RatioRow> {
        self.rows.iter().find(|r| r.n == n && r.alpha == alpha)
    }
}

/// `E N^2 / (E N)^2` with a delta-method interval, from `ln N` samples.
fn moment_ratio(ln_counts: &[f64]) -> (f64, f64, f64, Option<(f64, f64, f64)>) {
    let s = ln_counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if s == f64::NEG_INFINITY {
        return (0.0, 0.0, s, None);
    }
    let x: Vec<f64> = ln_counts.iter().map(|l| (l - s).exp()).collect();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let r = x.len() as f64;
    let m1 = x.iter().sum::<f64>() / r;
    let m2 = x2.iter().sum::<f64>() / r;
    let ratio = m2 / (m1 * m1);
    let (v11, v22, v12) = if x.len() > 1 {
        let c = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
            a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / (r - 1.0)
        };
        (c(&x, m1, &x, m1), c(&x2, m2, &x2, m2), c(&x, m1, &x2, m2))
    } else {
        (0.0, 0.0, 0.0)
    };
    let g1 = -2.0 * m2 / (m1 * m1 * m1);
    let g2 = 1.0 / (m1 * m1);
    let var = (g1 * g1 * v11 + g2 * g2 * v22 + 2.0 * g1 * g2 * v12) / r;
    let hw = Z95 * var.max(0.0).sqrt();
    (m1, m2, s, Some((ratio, ratio - hw, ratio + hw)))
}

/// Both moments of `N_n(α)` from the same replications, for every cell of
/// the grid.
pub fn second_moment_ratio(cfg: &ExperimentConfig) -> Result<SecondMomentReport> {
    cfg.validate()?;
    check_unit_alphas(cfg)?;
    let started = Instant::now();
    let geom = Geometry::build(cfg.params.mode, cfg.n_max());
    let recs = run_reps(cfg, |rep, env| {
        let mut obs = Vec::new();
        for (n, a, c) in grid_counts(cfg, env, &geom)? {
            obs.push(Observation::new(n, Some(a), "count", Some(c.to_f64())));
            obs.push(Observation::new(n, Some(a), "ln_count", Some(c.ln())));
        }
        Ok(RepRecord {
            rep,
            seed: cfg.rep_seed(rep),
            observations: obs,
        })
    })?;
    let result = assemble("second_moment_ratio", cfg, recs, Some("count"), started);
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        for &a in &cfg.alpha_grid {
            let lns: Vec<f64> = result
                .values(n, Some(a), "ln_count")
                .into_iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect();
            let zero_fraction = lns.iter().filter(|l| **l == f64::NEG_INFINITY).count() as f64 / lns.len() as f64;
            let (m1, m2, s, r) = moment_ratio(&lns);
            rows.push(RatioRow {
                n,
                alpha: a,
                scaled_mean: m1,
                scaled_second_moment: m2,
                ln_scale: s,
                ratio: r.map(|r| r.0),
                ci_low: r.map(|r| r.1),
                ci_high: r.map(|r| r.2),
                zero_fraction,
            });
        }
    }
    Ok(SecondMomentReport {
        alpha_at_least_p: cfg.alpha_grid.iter().all(|a| *a >= cfg.params.p),
        result,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingPoint {
    pub p: f64,
    pub m_hat: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// CI half-width below 10% of `m_hat`.
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingFit {
    pub p_grid: Vec<f64>,
    pub n: usize,
    pub points: Vec<ScalingPoint>,
    pub gamma: f64,
    pub intercept: f64,
    pub gamma_stderr: f64,
    pub gamma_ci_low: f64,
    pub gamma_ci_high: f64,
    pub residuals: Vec<f64>,
}

/// Least squares fit of `ln m = γ ln p + c` over `(p, m)` pairs.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.iter().any(|(p, m)| !(*p > 0.0 && *m > 0.0)) {
        return Err(LppError::Domain("power-law fit needs positive p and m".into()));
    }
    let xs: Vec<f64> = points.iter().map(|(p, _)| p.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, m)| m.ln()).collect();
    linear_fit(&xs, &ys).ok_or_else(|| LppError::Domain("power-law fit needs two distinct p values".into()))
}

/// `estimate_m` at every `p` of the grid (all other settings from
/// `template`), then a log-log fit of `MHat` at the largest `n`.
pub fn scaling_fit(p_grid: &[f64], template: &ExperimentConfig) -> Result<ScalingFit> {
    if let Some(p) = p_grid.iter().find(|p| !(**p > 0.0 && **p <= 0.2)) {
        return Err(LppError::Domain(format!("scaling grid must lie in (0, 0.2], got {p}")));
    }
    let n = template.n_max();
    let mut points = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let mut cfg = template.clone();
        cfg.params.p = p;
        let res = estimate_m(&cfg)?;
        let s = res.aggregate(n, None, "max_density").unwrap().summary;
        points.push(ScalingPoint {
            p,
            m_hat: s.mean,
            stderr: s.stderr,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            used: s.half_width() < 0.1 * s.mean,
        });
    }
    let used: Vec<(f64, f64)> = points.iter().filter(|pt| pt.used).map(|pt| (pt.p, pt.m_hat)).collect();
    let fit = fit_power_law(&used)?;
    Ok(ScalingFit {
        p_grid: p_grid.to_vec(),
        n,
        points,
        gamma: fit.slope,
        intercept: fit.intercept,
        gamma_stderr: fit.slope_stderr,
        gamma_ci_low: fit.slope - Z95 * fit.slope_stderr,
        gamma_ci_high: fit.slope + Z95 * fit.slope_stderr,
        residuals: fit.residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeRecord {
    pub rep: usize,
    pub seed: u64,
    pub interchange: InterchangeReport,
    /// `ln N_n` at the reduced threshold `W(base) - |selected|`.
    pub ln_count_at_floor: f64,
    pub ln_count: f64,
    pub root: f64,
    /// `N_n(reduced) >= 2^{|selected|}`.
    pub bound_holds: bool,
    /// No usable swap: the bound is the trivial 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeReport {
    pub config: ExperimentConfig,
    pub n: usize,
    pub alpha: f64,
    pub records: Vec<ProbeRecord>,
    /// Fraction of replications with `N_n(α)^{1/n} > 1`.
    pub fraction_root_above_one: f64,
    pub degenerate_reps: usize,
    pub all_bounds_hold: bool,
    pub wall_clock: f64,
}

/// Interchange lower bound for `path` against the exact counts.
pub fn probe_path(env: &Environment, path: &PathRecord, alpha: f64, memory_budget: u64) -> Result<ProbeRecord> {
    let n = path.len();
    let (report, _) = interchange_family(env, path, 0, 0)?;
    let floor = report.weight_floor as usize;
    let kmin = threshold(alpha, n);
    let opts = DpOptions {
        k_cap: Some(floor.max(kmin).min(n)),
        memory_budget,
        keep_history: false,
        ..DpOptions::default()
    };
    let geom = Geometry::build(env.mode(), n);
    let layer = run_counts(env, &path.start, n, &opts, &geom, |_| Ok(()))?;
    let at_floor = layer.at_least(floor)?;
    let count = layer.at_least(kmin)?;
    let m = report.selected();
    Ok(ProbeRecord {
        rep: 0,
        seed: env.seed(),
        ln_count_at_floor: at_floor.ln(),
        ln_count: count.ln(),
        root: count.root(n),
        bound_holds: at_floor.at_least_pow2(m as u64),
        degenerate: m == 0,
        interchange: report,
    })
}

/// Per replication: interchange family of the lexicographically least
/// maximal path, checked against the exact count at the reduced threshold.
/// Uses the largest `n` and the first `α` of the config.
pub fn lambda_above_one_probe(cfg: &ExperimentConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    check_unit_alphas(cfg)?;
    let started = Instant::now();
    let n = cfg.n_max();
    let alpha = cfg.alpha_grid[0];
    let geom = Geometry::build(cfg.params.mode, n);
    let records = run_reps(cfg, |rep, env| {
        let start = Vertex::origin(env.mode().dim());
        let path = max_weight_path(env, &start, n, &geom)?;
        let mut r = probe_path(env, &path, alpha, cfg.memory_budget)?;
        r.rep = rep;
        r.seed = cfg.rep_seed(rep);
        Ok(r)
    })?;
    let above = records.iter().filter(|r| r.root > 1.0).count();
    Ok(ProbeReport {
        config: cfg.clone(),
        n,
        alpha,
        fraction_root_above_one: above as f64 / records.len() as f64,
        degenerate_reps: records.iter().filter(|r| r.degenerate).count(),
        all_bounds_hold: records.iter().all(|r| r.bound_holds),
        records,
        wall_clock: started.elapsed().as_secs_f64(),
    })
}
