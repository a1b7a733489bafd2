//! Output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;
use crate::UsageError;

pub const CODE_VERSION: &str = concat!("lpp ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub subcommand: String,
    /// Every setting, defaults filled in; replaying these reproduces the
    /// outputs.
    pub settings: Settings,
    pub master_seed: u64,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// Seconds spent computing; kept here so result files stay bit-stable.
    pub wall_clock: Option<f64>,
    pub code_version: String,
}

/// The files one subcommand writes into the output directory.
pub struct Outputs {
    dir: PathBuf,
    sub: String,
    manifest: RunManifest,
}

impl Outputs {
    /// Refuse up front if any target exists and `force` is off.
    pub fn prepare(dir: &Path, sub: &str, settings: &Settings, seed: u64, files: &[&str], force: bool) -> Result<Outputs> {
        let outputs: Vec<PathBuf> = files.iter().map(|ext| dir.join(format!("{sub}.{ext}"))).collect();
        let manifest_path = dir.join(format!("{sub}.manifest.json"));
        if !force {
            if let Some(p) = outputs.iter().chain([&manifest_path]).find(|p| p.exists()) {
                return Err(UsageError(format!("{} exists; pass --force to overwrite", p.display())).into());
            }
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            sub: sub.to_string(),
            manifest: RunManifest {
                subcommand: sub.to_string(),
                settings: settings.clone(),
                master_seed: seed,
                outputs,
                started_at: now(),
                finished_at: None,
                wall_clock: None,
                code_version: CODE_VERSION.to_string(),
            },
        })
    }

    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.sub))
    }

    pub fn write_manifest(&self) -> Result<()> {
        let path = self.path("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn write(&self, ext: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(ext);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.write("json", serde_json::to_string_pretty(value)? + "\n")
    }

    pub fn finish(mut self, wall_clock: f64) -> Result<()> {
        self.manifest.finished_at = Some(now());
        self.manifest.wall_clock = Some(wall_clock);
        self.write_manifest()
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("manifest {}: {e}", path.display())).into())
}
