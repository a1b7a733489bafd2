//! Experiment knobs shared by every subcommand.
//!
//! The same struct is parsed from flags and from a TOML file (kebab-case
//! keys, identical to the flag names). Layers are merged with
//! `defaults < file < flags`.

use std::path::PathBuf;

use clap::Args;
use lpp_core::counting::{Backend, DEFAULT_MEMORY_BUDGET};
use lpp_core::lattice::GraphMode;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Lattice orientation: semi | full.
    #[arg(long)]
    pub mode: Option<String>,
    /// Probability that a site is good.
    #[arg(long)]
    pub p: Option<f64>,
    /// Reward of a good site (weights are reported in units of b).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated path lengths, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// auto | exact | log.
    #[arg(long)]
    pub backend: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Per-table memory budget in bytes.
    #[arg(long)]
    pub memory_budget: Option<u64>,
    /// Horizon of the exact collision bound.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    /// Monte Carlo walks for the collision estimate.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Longest simulated walk for the collision estimate.
    #[arg(long)]
    pub mc_horizon: Option<usize>,
    /// Comma-separated p values for the scaling fit.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    /// Largest length checked by oracle-validate.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Number of environments checked by oracle-validate.
    #[arg(long)]
    pub seeds: Option<u64>,
}

/// Flags controlling a run rather than the experiment.
#[derive(Args, Debug, Clone, Default)]
pub struct RunFlags {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Print the resolved configuration and memory estimate, then stop.
    #[arg(long)]
    pub dry_run: bool,
}

macro_rules! overlay_fields {
    ($top:expr, $base:expr; $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f),)* }
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Settings, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("config file: {e}")))
    }

    fn check_exclusive(&self) -> Result<(), UsageError> {
        if self.alpha.is_some() && self.alpha_grid.is_some() {
            return Err(UsageError("--alpha and --alpha-grid are mutually exclusive".into()));
        }
        if self.n.is_some() && self.n_grid.is_some() {
            return Err(UsageError("--n and --n-grid are mutually exclusive".into()));
        }
        Ok(())
    }

    /// `self` on top of `base`. A grid or scalar set in `self` replaces both
    /// forms in `base`.
    pub fn overlay(self, base: Settings) -> Result<Settings, UsageError> {
        self.check_exclusive()?;
        base.check_exclusive()?;
        let mut base = base;
        if self.alpha.is_some() || self.alpha_grid.is_some() {
            base.alpha = None;
            base.alpha_grid = None;
        }
        if self.n.is_some() || self.n_grid.is_some() {
            base.n = None;
            base.n_grid = None;
        }
        let top = self;
        Ok(overlay_fields!(top, base;
            d, mode, p, b, alpha, alpha_grid, n, n_grid, reps, seed, backend, threads,
            memory_budget, horizon, samples, mc_horizon, p_grid, nmax, seeds))
    }

    pub fn resolve(&self) -> Result<Resolved, UsageError> {
        self.check_exclusive()?;
        let d = self.d.unwrap_or(1);
        let mode_name = self.mode.clone().unwrap_or_else(|| "semi".into());
        let mode = GraphMode::from_name(&mode_name, d).map_err(|e| UsageError(e.to_string()))?;
        let backend = Backend::parse(self.backend.as_deref().unwrap_or("auto")).map_err(|e| UsageError(e.to_string()))?;
        let alpha_grid = match (&self.alpha, &self.alpha_grid) {
            (Some(a), _) => vec![*a],
            (_, Some(g)) => g.clone(),
            _ => vec![0.5],
        };
        let n_grid = match (&self.n, &self.n_grid) {
            (Some(n), _) => vec![*n],
            (_, Some(g)) => g.clone(),
            _ => vec![20],
        };
        if alpha_grid.is_empty() || n_grid.is_empty() {
            return Err(UsageError("grids must not be empty".into()));
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(UsageError(format!("n grid must be strictly increasing, got {n_grid:?}")));
        }
        Ok(Resolved {
            mode,
            p: self.p.unwrap_or(0.5),
            b: self.b.unwrap_or(1.0),
            alpha_grid,
            n_grid,
            reps: self.reps.unwrap_or(100),
            seed: self.seed.unwrap_or(0),
            backend,
            threads: self.threads.unwrap_or(0),
            memory_budget: self.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET),
            horizon: self.horizon.unwrap_or(1000),
            samples: self.samples.unwrap_or(100_000),
            mc_horizon: self.mc_horizon.unwrap_or(1000),
            p_grid: self.p_grid.clone().unwrap_or_else(|| vec![0.01, 0.02, 0.05, 0.1]),
            nmax: self.nmax.unwrap_or(10),
            seeds: self.seeds.unwrap_or(50),
        })
    }
}

/// Fully defaulted settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolved {
    pub mode: GraphMode,
    pub p: f64,
    pub b: f64,
    pub alpha_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub backend: Backend,
    pub threads: usize,
    pub memory_budget: u64,
    pub horizon: usize,
    pub samples: u64,
    pub mc_horizon: usize,
    pub p_grid: Vec<f64>,
    pub nmax: usize,
    pub seeds: u64,
}

impl Resolved {
    pub fn n_max(&self) -> usize {
        *self.n_grid.last().unwrap()
    }

    /// Explicit settings that resolve back to `self`.
    pub fn to_settings(&self) -> Settings {
        Settings {
            d: Some(self.mode.dim()),
            mode: Some(self.mode.name().to_string()),
            p: Some(self.p),
            b: Some(self.b),
            alpha: None,
            alpha_grid: Some(self.alpha_grid.clone()),
            n: None,
            n_grid: Some(self.n_grid.clone()),
            reps: Some(self.reps),
            seed: Some(self.seed),
            backend: Some(self.backend.to_string()),
            threads: Some(self.threads),
            memory_budget: Some(self.memory_budget),
            horizon: Some(self.horizon),
            samples: Some(self.samples),
            mc_horizon: Some(self.mc_horizon),
            p_grid: Some(self.p_grid.clone()),
            nmax: Some(self.nmax),
            seeds: Some(self.seeds),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = Settings::from_toml("d = 2\np = 0.3\nn-grid = [5, 10]\nreps = 7\n").unwrap();
        let flags = Settings {
            p: Some(0.4),
            n: Some(12),
            ..Settings::default()
        };
        let r = flags.overlay(file).unwrap().resolve().unwrap();
        assert_eq!(r.mode, GraphMode::semi(2));
        assert_eq!(r.p, 0.4);
        assert_eq!(r.n_grid, vec![12]);
        assert_eq!(r.reps, 7);
        assert_eq!(r.seed, 0);
    }

    #[test]
    fn rejects_unknown_keys_and_conflicts() {
        assert!(Settings::from_toml("colour = 3").is_err());
        let s = Settings {
            alpha: Some(0.1),
            alpha_grid: Some(vec![0.2]),
            ..Settings::default()
        };
        assert!(s.resolve().is_err());
        let bad = Settings {
            n_grid: Some(vec![10, 5]),
            ..Settings::default()
        };
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn explicit_settings_round_trip() {
        let r = Settings::default().resolve().unwrap();
        assert_eq!(r.to_settings().resolve().unwrap(), r);
    }
}
