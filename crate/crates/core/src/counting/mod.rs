//! Exact per-environment path statistics.

pub mod cell;
pub mod count;
pub mod dump;
pub mod geometry;
pub mod interchange;
pub mod max;
pub mod oracle;

pub use cell::{Backend, CountValue, Storage};
pub use count::{
    build_count_layers, count_layers, count_n, count_n_xy, final_count_layer, run_counts, CountLayer,
};
pub use geometry::Geometry;
pub use interchange::{interchange_family, select_non_interfering, InterchangeReport};
pub use max::{
    build_max_layers, max_layers, max_weight, max_weight_path, max_weight_profile, run_max,
    MaxWeightLayer,
};
pub use oracle::{enumerate_paths, oracle_table, OracleTable, DEFAULT_ORACLE_CAP};

use serde::{Deserialize, Serialize};

use crate::lattice::{Environment, GraphMode, Vertex};
use geometry::LevelGeom;

pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DpOptions {
    pub backend: Backend,
    /// Collapse weights `>= k_cap` into one slot.
    pub k_cap: Option<usize>,
    pub memory_budget: u64,
    pub keep_history: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            backend: Backend::Auto,
            k_cap: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            keep_history: true,
        }
    }
}

/// Smallest integer `k >= α n`.
///
/// `α n` is snapped to the nearest integer when it lies within floating
/// rounding of it, so `0.3 * 20` gives 6 rather than 7.
pub fn threshold(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    if x <= 0.0 {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Good bits of every position at level `t` for paths from `start`.
pub(crate) fn good_bits(env: &Environment, start: &Vertex, t: usize, lg: &LevelGeom) -> Vec<bool> {
    let d = start.dim();
    let mut abs = vec![0i64; d];
    let semi = matches!(env.mode(), GraphMode::SemiOriented(_));
    (0..lg.len())
        .map(|j| {
            let off = lg.offset(j);
            let mut used = 0i64;
            for i in 0..d {
                abs[i] = start.spatial[i] + off[i] as i64;
                used += off[i] as i64;
            }
            let level = if semi {
                start.level + t as u64
            } else {
                start.level + t as u64 - used as u64
            };
            env.good_raw(level, &abs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_snaps() {
        assert_eq!(threshold(0.3, 20), 6);
        assert_eq!(threshold(0.7, 20), 14);
        assert_eq!(threshold(0.5, 10), 5);
        assert_eq!(threshold(0.51, 10), 6);
        assert_eq!(threshold(0.0, 10), 0);
        assert_eq!(threshold(1.0, 7), 7);
        assert_eq!(threshold(1.0 / 3.0, 3), 1);
        assert_eq!(threshold(0.1, 3), 1);
    }
}
