//! Monte Carlo experiments over independent environment replications.
//!
//! Replication `r` uses the environment seeded by `derive_seed(master, r)`.
//! Replications run on the rayon pool but are collected and reduced in rep
//! order, so results do not depend on the number of workers.

mod experiments;
mod stats;

pub use experiments::{
    estimate_lambda, estimate_m, fit_power_law, lambda_above_one_probe, prob_n_zero, probe_path,
    second_moment_ratio, scaling_fit, straight_path, ProbeRecord, ProbeReport, RatioRow, ScalingFit,
    ScalingPoint, SecondMomentReport, ZeroCurve, ZeroProbReport, ZeroRow,
};
pub use stats::{linear_fit, LinearFit, Summary, Z95};

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnnealedParams;
use crate::counting::{Backend, DEFAULT_MEMORY_BUDGET};
use crate::error::{LppError, Result};
use crate::lattice::{derive_seed, Environment};

pub const CODE_VERSION: &str = concat!("lpp-core ", env!("CARGO_PKG_VERSION"));

/// Environment override used by deterministic fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    AllGood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub params: AnnealedParams,
    #[serde(default = "default_b")]
    pub b: f64,
    /// Path lengths, strictly increasing.
    pub n_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_budget")]
    pub memory_budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<Fixture>,
}

fn default_b() -> f64 {
    1.0
}

fn default_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET
}

impl ExperimentConfig {
    pub fn new(params: AnnealedParams, n_grid: Vec<usize>, alpha_grid: Vec<f64>, reps: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            params,
            b: 1.0,
            n_grid,
            alpha_grid,
            reps,
            master_seed,
            backend: Backend::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            fixture: None,
        }
    }

    pub fn with_fixture(mut self, fixture: Fixture) -> Self {
        self.fixture = Some(fixture);
        self
    }

    pub fn validate(&self) -> Result<()> {
        AnnealedParams::new(self.params.p, self.params.mode)?;
        if self.reps == 0 {
            return Err(LppError::Config("reps must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(LppError::Config("n grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LppError::Config(format!("n grid must be strictly increasing: {:?}", self.n_grid)));
        }
        if self.alpha_grid.is_empty() {
            return Err(LppError::Config("alpha grid is empty".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(LppError::Domain(format!("alpha must be finite and non-negative, got {a}")));
        }
        if !self.b.is_finite() || self.b <= 0.0 {
            return Err(LppError::Domain(format!("b must be positive, got {}", self.b)));
        }
        if self.memory_budget == 0 {
            return Err(LppError::Config("memory budget must be positive".into()));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        *self.n_grid.last().unwrap_or(&0)
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.master_seed, rep as u64)
    }

    pub fn environment(&self, rep: usize) -> Result<Environment> {
        match self.fixture {
            Some(Fixture::AllGood) => Ok(Environment::all_good(self.params.mode)),
            None => Environment::new(self.rep_seed(rep), self.params.p, self.params.mode)?.with_b(self.b),
        }
    }
}

/// One scalar produced by a replication. `value` is `None` when the
/// statistic is undefined for that replication (e.g. `log_rate` with no
/// qualifying path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Observation {
    pub n: usize,
    pub alpha: Option<f64>,
    pub statistic: String,
    pub value: Option<f64>,
}

impl Observation {
    pub fn new(n: usize, alpha: Option<f64>, statistic: &str, value: Option<f64>) -> Self {
        Observation {
            n,
            alpha,
            statistic: statistic.to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub n: usize,
    pub alpha: Option<f64>,
    pub statistic: String,
    #[serde(flatten)]
    pub summary: Summary,
    /// Fraction of replications with `N_n(α) = 0` in this cell, where the
    /// experiment counts paths.
    pub zero_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentResult {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub per_rep: Vec<RepRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Zero fraction of the primary cell: largest `n`, first `α`.
    pub zero_fraction: Option<f64>,
    /// Seconds.
    pub wall_clock: f64,
    pub code_version: String,
}

impl ExperimentResult {
    pub fn aggregate(&self, n: usize, alpha: Option<f64>, statistic: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.n == n && a.alpha == alpha && a.statistic == statistic)
    }

    /// Raw per-replication values of one cell, in rep order.
    pub fn values(&self, n: usize, alpha: Option<f64>, statistic: &str) -> Vec<Option<f64>> {
        self.per_rep
            .iter()
            .map(|r| {
                r.observations
                    .iter()
                    .find(|o| o.n == n && o.alpha == alpha && o.statistic == statistic)
                    .and_then(|o| o.value)
            })
            .collect()
    }

    /// Copy with the timing field cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        ExperimentResult {
            wall_clock: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LppError::Parse(e.to_string()))
    }

    /// One row per `(n, alpha, statistic)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            n: usize,
            alpha: Option<f64>,
            statistic: &'a str,
            samples: usize,
            mean: f64,
            stdev: f64,
            stderr: f64,
            ci_low: f64,
            ci_high: f64,
            zero_fraction: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for a in &self.aggregates {
            w.serialize(Row {
                n: a.n,
                alpha: a.alpha,
                statistic: &a.statistic,
                samples: a.summary.samples,
                mean: a.summary.mean,
                stdev: a.summary.stdev,
                stderr: a.summary.stderr,
                ci_low: a.summary.ci_low,
                ci_high: a.summary.ci_high,
                zero_fraction: a.zero_fraction,
            })
            .map_err(|e| LppError::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| LppError::Parse(e.to_string()))
    }
}

/// Run `f(rep, env)` for every replication and return the outputs in rep
/// order.
pub(crate) fn run_reps<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Environment) -> Result<T> + Sync,
{
    (0..cfg.reps)
        .into_par_iter()
        .map(|r| f(r, &cfg.environment(r)?))
        .collect()
}

/// Build the result from raw records. `zero_stat` names the statistic whose
/// zero values mark `N = 0` within each `(n, alpha)` cell.
pub(crate) fn assemble(
    experiment: &str,
    cfg: &ExperimentConfig,
    per_rep: Vec<RepRecord>,
    zero_stat: Option<&str>,
    started: Instant,
) -> ExperimentResult {
    let keys: Vec<(usize, Option<f64>, String)> = per_rep
        .first()
        .map(|r| {
            r.observations
                .iter()
                .map(|o| (o.n, o.alpha, o.statistic.clone()))
                .collect()
        })
        .unwrap_or_default();
    let cell = |n: usize, alpha: Option<f64>, stat: &str| -> Vec<Option<f64>> {
        per_rep
            .iter()
            .map(|r| {
                r.observations
                    .iter()
                    .find(|o| o.n == n && o.alpha == alpha && o.statistic == stat)
                    .and_then(|o| o.value)
            })
            .collect()
    };
    let zero_of = |n: usize, alpha: Option<f64>| {
        zero_stat.map(|z| {
            let v = cell(n, alpha, z);
            v.iter().filter(|x| **x == Some(0.0)).count() as f64 / v.len().max(1) as f64
        })
    };
    let aggregates = keys
        .iter()
        .map(|(n, alpha, stat)| {
            let xs: Vec<f64> = cell(*n, *alpha, stat).into_iter().flatten().collect();
            Aggregate {
                n: *n,
                alpha: *alpha,
                statistic: stat.clone(),
                summary: Summary::of(&xs),
                zero_fraction: zero_of(*n, *alpha),
            }
        })
        .collect();
    let zero_fraction = zero_of(cfg.n_max(), cfg.alpha_grid.first().copied());
    ExperimentResult {
        experiment: experiment.to_string(),
        config: cfg.clone(),
        per_rep,
        aggregates,
        zero_fraction,
        wall_clock: started.elapsed().as_secs_f64(),
        code_version: CODE_VERSION.to_string(),
    }
}
