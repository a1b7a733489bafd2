use std::fmt::Write as _;

use anyhow::Result;
use lpp_core::analytic::{
    alpha_one, collision_rho, expected_n_ln, phi, phi_root, AnnealedParams, RhoOptions,
};
use lpp_core::counting::count::{check_count_budget, estimate_count_bytes};
use lpp_core::counting::dump::write_count_csv;
use lpp_core::counting::{
    count_layers, count_n, max_weight, oracle_table, threshold, CountValue, DpOptions, Geometry,
    DEFAULT_ORACLE_CAP,
};
use lpp_core::estimators::{
    estimate_lambda, estimate_m, lambda_above_one_probe, prob_n_zero, scaling_fit, second_moment_ratio,
    ExperimentConfig, ExperimentResult,
};
use lpp_core::lattice::{derive_seed, Environment, GraphMode, Vertex};
use num_bigint::BigUint;
use serde::Serialize;

use crate::output::Outputs;
use crate::settings::Resolved;
use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sub {
    Count,
    EstimateM,
    EstimateLambda,
    ProbZero,
    SecondMoment,
    Scaling,
    Rho,
    PhiCurve,
    InterchangeCheck,
    OracleValidate,
}

impl Sub {
    pub fn name(self) -> &'static str {
        match self {
            Sub::Count => "count",
            Sub::EstimateM => "estimate-m",
            Sub::EstimateLambda => "estimate-lambda",
            Sub::ProbZero => "prob-zero",
            Sub::SecondMoment => "second-moment",
            Sub::Scaling => "scaling",
            Sub::Rho => "rho",
            Sub::PhiCurve => "phi-curve",
            Sub::InterchangeCheck => "interchange-check",
            Sub::OracleValidate => "oracle-validate",
        }
    }

    pub fn from_name(s: &str) -> Option<Sub> {
        ALL.iter().copied().find(|c| c.name() == s)
    }

    /// File extensions written next to the manifest.
    pub fn files(self) -> &'static [&'static str] {
        match self {
            Sub::Rho | Sub::OracleValidate => &["json"],
            _ => &["json", "csv"],
        }
    }
}

const ALL: [Sub; 10] = [
    Sub::Count,
    Sub::EstimateM,
    Sub::EstimateLambda,
    Sub::ProbZero,
    Sub::SecondMoment,
    Sub::Scaling,
    Sub::Rho,
    Sub::PhiCurve,
    Sub::InterchangeCheck,
    Sub::OracleValidate,
];

fn params(r: &Resolved) -> Result<AnnealedParams> {
    Ok(AnnealedParams::new(r.p, r.mode)?)
}

fn experiment(r: &Resolved) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(params(r)?, r.n_grid.clone(), r.alpha_grid.clone(), r.reps, r.seed);
    cfg.b = r.b;
    cfg.backend = r.backend;
    cfg.memory_budget = r.memory_budget;
    cfg.validate()?;
    Ok(cfg)
}

fn single_n(r: &Resolved) -> Result<usize> {
    match r.n_grid.as_slice() {
        [n] => Ok(*n),
        _ => Err(UsageError("this subcommand takes a single --n".into()).into()),
    }
}

fn single_alpha(r: &Resolved) -> Result<f64> {
    match r.alpha_grid.as_slice() {
        [a] => Ok(*a),
        _ => Err(UsageError("this subcommand takes a single --alpha".into()).into()),
    }
}

/// Peak bytes of one replication, for `--dry-run`.
pub fn estimate_memory(sub: Sub, r: &Resolved) -> Result<u64> {
    let n = r.n_max();
    let max_bytes = |n: usize| Geometry::estimate_bytes(r.mode, n) + 8 * Geometry::count_at(r.mode, n);
    let cap = r.n_grid.iter().flat_map(|&n| r.alpha_grid.iter().map(move |&a| threshold(a.min(1.0), n))).max();
    Ok(match sub {
        Sub::Count => {
            let storage = r.backend.resolve(n, r.mode.out_degree())?;
            check_count_budget(r.mode, n, storage, None, true, u64::MAX)?
        }
        Sub::EstimateLambda | Sub::SecondMoment => estimate_count_bytes(r.mode, n, r.backend, cap)?,
        Sub::InterchangeCheck => {
            let layers: u64 = (0..=n).map(|t| 4 * Geometry::count_at(r.mode, t)).sum();
            layers + estimate_count_bytes(r.mode, n, r.backend, Some(n))?
        }
        Sub::EstimateM | Sub::ProbZero | Sub::Scaling => max_bytes(n),
        Sub::OracleValidate => {
            let storage = r.backend.resolve(r.nmax, r.mode.out_degree())?;
            check_count_budget(r.mode, r.nmax, storage, None, true, u64::MAX)?
        }
        Sub::Rho => {
            let dim = if r.mode.is_semi() { r.mode.dim() } else { r.mode.dim() + 1 } as u32;
            8 * 2 * (2 * r.horizon as u64 + 5).pow(dim)
        }
        Sub::PhiCurve => 0,
    })
}

/// Compute and write the outputs of `sub`. Returns text for stdout.
pub fn run(sub: Sub, r: &Resolved, out: &Outputs) -> Result<String> {
    match sub {
        Sub::Count => cmd_count(r, out),
        Sub::EstimateM => {
            let res = estimate_m(&experiment(r)?)?;
            write_result(out, &res)?;
            Ok(summarize(&res, "max_density"))
        }
        Sub::EstimateLambda => {
            let res = estimate_lambda(&experiment(r)?)?;
            write_result(out, &res)?;
            Ok(summarize(&res, "root"))
        }
        Sub::ProbZero => cmd_prob_zero(r, out),
        Sub::SecondMoment => cmd_second_moment(r, out),
        Sub::Scaling => cmd_scaling(r, out),
        Sub::Rho => cmd_rho(r, out),
        Sub::PhiCurve => cmd_phi_curve(r, out),
        Sub::InterchangeCheck => cmd_interchange(r, out),
        Sub::OracleValidate => cmd_oracle_validate(r, out),
    }
}

fn write_result(out: &Outputs, res: &ExperimentResult) -> Result<()> {
    // timing lives in the manifest so result files are reproducible
    let res = res.without_timing();
    out.write_json(&res)?;
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    out.write("csv", csv)
}

fn summarize(res: &ExperimentResult, stat: &str) -> String {
    let mut s = String::new();
    for a in res.aggregates.iter().filter(|a| a.statistic == stat) {
        let alpha = a.alpha.map(|x| format!(" alpha={x}")).unwrap_or_default();
        let zero = a.zero_fraction.map(|z| format!(" zeroFraction={z}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "n={}{alpha} {stat} mean={:.6} stderr={:.6} ci=[{:.6}, {:.6}]{zero}",
            a.n, a.summary.mean, a.summary.stderr, a.summary.ci_low, a.summary.ci_high
        );
    }
    s
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CountSummary {
    n: usize,
    alpha: f64,
    seed: u64,
    count: String,
    log10_count: f64,
    max_weight: u64,
    total: String,
    conservation_ok: bool,
    exact: bool,
}

fn cmd_count(r: &Resolved, out: &Outputs) -> Result<String> {
    let n = single_n(r)?;
    let alpha = single_alpha(r)?;
    let env = Environment::new(r.seed, r.p, r.mode)?.with_b(r.b)?;
    let opts = DpOptions {
        backend: r.backend,
        memory_budget: r.memory_budget,
        ..DpOptions::default()
    };
    let geom = Geometry::build(r.mode, n);
    let layers = count_layers(&env, &Vertex::origin(r.mode.dim()), n, &opts, &geom)?;
    let last = layers.last().unwrap();
    let count = count_n(last, alpha)?;
    let total = last.total();
    let deg = r.mode.out_degree();
    let ok = match &total {
        CountValue::Exact(t) => *t == BigUint::from(deg).pow(n as u32),
        CountValue::Log(l) => (l - n as f64 * (deg as f64).ln()).abs() <= 1e-12 * (n.max(1) as f64),
    };
    let mw = max_weight(&env, n)?;
    let mut csv = Vec::new();
    write_count_csv(&layers, &mut csv)?;
    out.write("csv", csv)?;
    out.write_json(&CountSummary {
        n,
        alpha,
        seed: r.seed,
        count: count.to_string(),
        log10_count: count.log10(),
        max_weight: mw,
        total: total.to_string(),
        conservation_ok: ok,
        exact: last.is_exact(),
    })?;
    let expected = match &total {
        CountValue::Exact(_) => BigUint::from(deg).pow(n as u32).to_string(),
        CountValue::Log(_) => format!("{deg}^{n}"),
    };
    Ok(format!(
        "N={count}\nmax_weight={mw}\nconservation: total={total} expected={expected} {}\n",
        if ok { "ok" } else { "FAILED" }
    ))
}

fn cmd_prob_zero(r: &Resolved, out: &Outputs) -> Result<String> {
    let rep = prob_n_zero(&experiment(r)?)?;
    let mut rep = rep;
    rep.result = rep.result.without_timing();
    out.write_json(&rep)?;
    let mut csv = String::from("alpha,t,frequency,ci_low,ci_high\n");
    let mut s = format!("MHat={:.6} epsilon={:.6}\n", rep.m_hat, rep.epsilon);
    for c in &rep.curves {
        for row in &c.rows {
            let _ = writeln!(csv, "{},{},{},{},{}", c.alpha, row.t, row.frequency, row.ci_low, row.ci_high);
        }
        let freqs: Vec<String> = c.rows.iter().map(|r| format!("{}:{}", r.t, r.frequency)).collect();
        let slope = c.fit.as_ref().map(|f| f.slope.to_string()).unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            s,
            "alpha={} P(N=0) [{}] slope={slope} preconditionMet={} decayConfirmed={}",
            c.alpha,
            freqs.join(" "),
            c.precondition_met,
            c.decay_confirmed
        );
    }
    out.write("csv", csv)?;
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn cmd_second_moment(r: &Resolved, out: &Outputs) -> Result<String> {
    let mut rep = second_moment_ratio(&experiment(r)?)?;
    rep.result = rep.result.without_timing();
    out.write_json(&rep)?;
    let mut csv = String::from("n,alpha,ratio,ci_low,ci_high,zero_fraction\n");
    let mut s = String::new();
    if !rep.alpha_at_least_p {
        s.push_str("note: some alpha < p\n");
    }
    for row in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", row.n, row.alpha, opt(row.ratio), opt(row.ci_low), opt(row.ci_high), row.zero_fraction);
        let _ = writeln!(s, "n={} alpha={} ratio={} ci=[{}, {}]", row.n, row.alpha, opt(row.ratio), opt(row.ci_low), opt(row.ci_high));
    }
    out.write("csv", csv)?;
    Ok(s)
}

fn cmd_scaling(r: &Resolved, out: &Outputs) -> Result<String> {
    let fit = scaling_fit(&r.p_grid, &experiment(r)?)?;
    out.write_json(&fit)?;
    let mut csv = String::from("p,m_hat,stderr,ci_low,ci_high,used\n");
    for pt in &fit.points {
        let _ = writeln!(csv, "{},{},{},{},{},{}", pt.p, pt.m_hat, pt.stderr, pt.ci_low, pt.ci_high, pt.used);
    }
    out.write("csv", csv)?;
    Ok(format!(
        "gamma={:.6} ci=[{:.6}, {:.6}] intercept={:.6} points used={}/{}\n",
        fit.gamma,
        fit.gamma_ci_low,
        fit.gamma_ci_high,
        fit.intercept,
        fit.points.iter().filter(|p| p.used).count(),
        fit.points.len()
    ))
}

fn cmd_rho(r: &Resolved, out: &Outputs) -> Result<String> {
    let est = collision_rho(
        &params(r)?,
        &RhoOptions {
            horizon: r.horizon,
            mc_samples: r.samples,
            mc_horizon: r.mc_horizon,
            seed: r.seed,
        },
    );
    out.write_json(&est)?;
    Ok(format!(
        "lowerBound={:.6} (T={})\npointEstimate={:.6} stderr={:.6} (samples={}, horizon={})\n",
        est.lower_bound, est.horizon, est.point_estimate, est.mc_stderr, est.mc_samples, est.mc_horizon
    ))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PhiCurve {
    p: f64,
    mode: GraphMode,
    n_grid: Vec<usize>,
    phi_root: f64,
    phi_root_status: lpp_core::analytic::RootStatus,
    alpha_one: f64,
    rows: Vec<PhiRow>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PhiRow {
    alpha: f64,
    phi: f64,
    expected_n_root: Vec<f64>,
}

fn cmd_phi_curve(r: &Resolved, out: &Outputs) -> Result<String> {
    let prm = params(r)?;
    if let Some(a) = r.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(UsageError(format!("alpha must lie in [0,1], got {a}")).into());
    }
    let rows: Vec<PhiRow> = r
        .alpha_grid
        .iter()
        .map(|&alpha| PhiRow {
            alpha,
            phi: phi(alpha, &prm),
            expected_n_root: r
                .n_grid
                .iter()
                .map(|&n| if n == 0 { f64::NAN } else { (expected_n_ln(n, alpha, &prm) / n as f64).exp() })
                .collect(),
        })
        .collect();
    let root = phi_root(&prm);
    let mut csv = String::from("alpha,phi");
    for n in &r.n_grid {
        let _ = write!(csv, ",expected_N_root_n{n}");
    }
    csv.push('\n');
    let mut s = String::new();
    for row in &rows {
        let _ = write!(csv, "{},{}", row.alpha, row.phi);
        for v in &row.expected_n_root {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
        let _ = writeln!(s, "alpha={} phi={}", row.alpha, row.phi);
    }
    let _ = writeln!(s, "phi_root={} ({:?})", root.alpha, root.status);
    out.write("csv", csv)?;
    out.write_json(&PhiCurve {
        p: r.p,
        mode: r.mode,
        n_grid: r.n_grid.clone(),
        phi_root: root.alpha,
        phi_root_status: root.status,
        alpha_one: alpha_one(&prm)?,
        rows,
    })?;
    Ok(s)
}

fn cmd_interchange(r: &Resolved, out: &Outputs) -> Result<String> {
    let mut rep = lambda_above_one_probe(&experiment(r)?)?;
    rep.wall_clock = 0.0;
    out.write_json(&rep)?;
    let mut csv = String::from("rep,seed,base_weight,selected,weight_floor,ln_count_at_floor,ln_count,root,bound_holds,degenerate\n");
    for x in &rep.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            x.rep,
            x.seed,
            x.interchange.base_weight,
            x.interchange.selected(),
            x.interchange.weight_floor,
            x.ln_count_at_floor,
            x.ln_count,
            x.root,
            x.bound_holds,
            x.degenerate
        );
    }
    out.write("csv", csv)?;
    Ok(format!(
        "n={} alpha={} fractionRootAboveOne={} allBoundsHold={} degenerateReps={}\n",
        rep.n, rep.alpha, rep.fraction_root_above_one, rep.all_bounds_hold, rep.degenerate_reps
    ))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OracleReport {
    mode: GraphMode,
    p: f64,
    nmax: usize,
    seeds: u64,
    tables: u64,
    mismatches: Vec<String>,
}

/// Raised when the DP disagrees with enumeration.
#[derive(Debug)]
pub struct Mismatch(pub usize);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} tables differ from enumeration", self.0)
    }
}

impl std::error::Error for Mismatch {}

fn cmd_oracle_validate(r: &Resolved, out: &Outputs) -> Result<String> {
    let geom = Geometry::build(r.mode, r.nmax);
    let start = Vertex::origin(r.mode.dim());
    let opts = DpOptions {
        backend: r.backend,
        memory_budget: r.memory_budget,
        ..DpOptions::default()
    };
    let mut mismatches = Vec::new();
    let mut tables = 0;
    for i in 0..r.seeds {
        let seed = derive_seed(r.seed, i);
        let env = Environment::new(seed, r.p, r.mode)?;
        let layers = count_layers(&env, &start, r.nmax, &opts, &geom)?;
        for (n, layer) in layers.iter().enumerate() {
            tables += 1;
            let oracle = oracle_table(&env, &start, n, DEFAULT_ORACLE_CAP)?;
            let mut nonzero = 0;
            let mut same = true;
            for (y, col) in layer.entries() {
                for (k, c) in col.iter().enumerate() {
                    let want = oracle.table.get(&(y.clone(), k as u64)).copied().unwrap_or(0);
                    let ok = match c {
                        CountValue::Exact(v) => *v == BigUint::from(want),
                        CountValue::Log(l) => (want == 0 && *l == f64::NEG_INFINITY) || (l - (want as f64).ln()).abs() < 1e-9,
                    };
                    same &= ok;
                    nonzero += !c.is_zero() as usize;
                }
            }
            same &= nonzero == oracle.table.len();
            if !same {
                mismatches.push(format!("seed={seed} n={n}"));
            }
        }
    }
    let bad = mismatches.len();
    out.write_json(&OracleReport {
        mode: r.mode,
        p: r.p,
        nmax: r.nmax,
        seeds: r.seeds,
        tables,
        mismatches,
    })?;
    let msg = format!("{tables} tables checked, {bad} mismatches\n");
    if bad > 0 {
        print!("{msg}");
        return Err(Mismatch(bad).into());
    }
    Ok(msg)
}
