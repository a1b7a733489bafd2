//! Seed-keyed Bernoulli environment.
//!
//! Each vertex gets a uniform in `[0, 1)` from a keyed hash of the seed and
//! a canonical encoding of the vertex (level first, then the spatial
//! coordinates in axis order, zig-zag encoded). The vertex is good when its
//! uniform is below `p`, so environments sharing a seed are coupled
//! monotonically in `p`.

use serde::{Deserialize, Serialize};

use super::{GraphMode, Vertex};
use crate::error::{LppError, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Keyed hash of a sequence of words; the vertex stream position.
#[inline]
pub(crate) fn keyed_hash(key: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = key;
    for (i, w) in words.into_iter().enumerate() {
        h = mix64(h ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    h
}

#[inline]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derive an independent 64-bit seed from a master seed and an index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master ^ 0x5eed_0f_c0ffee) ^ mix64(index.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvironmentConfig {
    pub seed: u64,
    pub p: f64,
    pub b: f64,
    pub mode: GraphMode,
    /// Largest admissible |coordinate|.
    pub max_coord: i64,
}

#[derive(Debug, Clone)]
pub struct Environment {
    seed: u64,
    key: u64,
    p: f64,
    b: f64,
    mode: GraphMode,
    max_coord: i64,
    all_good: bool,
}

impl Environment {
    pub fn new(seed: u64, p: f64, mode: GraphMode) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LppError::Domain(format!("p must lie in (0,1), got {p}")));
        }
        mode.validate()?;
        Ok(Environment {
            seed,
            key: mix64(seed.wrapping_add(GOLDEN)),
            p,
            b: 1.0,
            mode,
            max_coord: i64::MAX / 4,
            all_good: false,
        })
    }

    pub fn from_config(cfg: &EnvironmentConfig) -> Result<Self> {
        Environment::new(cfg.seed, cfg.p, cfg.mode)?
            .with_b(cfg.b)?
            .with_max_coord(cfg.max_coord)
    }

    /// Degenerate fixture in which every vertex is good (the `p -> 1` limit).
    pub fn all_good(mode: GraphMode) -> Self {
        Environment {
            seed: 0,
            key: 0,
            p: 1.0,
            b: 1.0,
            mode,
            max_coord: i64::MAX / 4,
            all_good: true,
        }
    }

    pub fn with_b(mut self, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(LppError::Domain(format!("b must be positive, got {b}")));
        }
        self.b = b;
        Ok(self)
    }

    pub fn with_max_coord(mut self, bound: i64) -> Result<Self> {
        if bound < 0 {
            return Err(LppError::Config(format!("coordinate bound must be >= 0, got {bound}")));
        }
        self.max_coord = bound;
        Ok(self)
    }

    /// Same uniforms, different success probability.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        let mut env = Environment::new(self.seed, p, self.mode)?;
        env.b = self.b;
        env.max_coord = self.max_coord;
        Ok(env)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn max_coord(&self) -> i64 {
        self.max_coord
    }

    pub fn config(&self) -> EnvironmentConfig {
        EnvironmentConfig {
            seed: self.seed,
            p: self.p,
            b: self.b,
            mode: self.mode,
            max_coord: self.max_coord,
        }
    }

    /// The per-vertex uniform.
    #[inline]
    pub fn uniform_raw(&self, level: u64, spatial: &[i64]) -> f64 {
        let words = std::iter::once(level).chain(spatial.iter().map(|&c| zigzag(c)));
        to_unit(keyed_hash(self.key, words))
    }

    #[inline]
    pub fn good_raw(&self, level: u64, spatial: &[i64]) -> bool {
        self.all_good || self.uniform_raw(level, spatial) < self.p
    }

    pub fn uniform(&self, v: &Vertex) -> f64 {
        self.uniform_raw(v.level, &v.spatial)
    }

    pub fn good_bit(&self, v: &Vertex) -> bool {
        self.good_raw(v.level, &v.spatial)
    }

    pub fn check_bounds(&self, v: &Vertex) -> Result<()> {
        match v.spatial.iter().find(|c| c.abs() > self.max_coord) {
            Some(&coord) => Err(LppError::OutOfBounds {
                coord,
                bound: self.max_coord,
            }),
            None => Ok(()),
        }
    }

    /// Check that every vertex within `n` steps of `start` stays inside the
    /// coordinate bound.
    pub fn check_reach(&self, start: &Vertex, n: usize) -> Result<()> {
        for &c in &start.spatial {
            let reach = c.abs().saturating_add(n as i64);
            if reach > self.max_coord {
                return Err(LppError::OutOfBounds {
                    coord: c.signum().max(1) * reach,
                    bound: self.max_coord,
                });
            }
        }
        Ok(())
    }
}
