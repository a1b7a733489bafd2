//! Families of paths obtained from a base path by swapping consecutive
//! unequal steps.
//!
//! Swapping steps `k` and `k+1` moves only the vertex at time `k+1`, so each
//! applied swap costs at most one unit of weight. Swaps at positions that
//! differ by at least two touch disjoint step pairs and commute, so any
//! subset of a non-interfering selection yields a distinct path.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{path_weight, Environment, PathRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InterchangeReport {
    pub base_path: PathRecord,
    pub base_weight: u64,
    pub qualifying_positions: Vec<usize>,
    pub selected_positions: Vec<usize>,
    /// `2^|selected|`.
    pub family_size: f64,
    /// `W(base) - |selected|`; never below zero.
    pub weight_floor: u64,
}

impl InterchangeReport {
    pub fn selected(&self) -> usize {
        self.selected_positions.len()
    }
}

/// Greedy left-to-right choice of positions pairwise at distance >= 2.
pub fn select_non_interfering(positions: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &k in positions {
        if out.last().is_none_or(|&last| k >= last + 2) {
            out.push(k);
        }
    }
    out
}

fn apply(base: &PathRecord, selected: &[usize], mask: &[bool]) -> PathRecord {
    let mut steps = base.steps.clone();
    for (&k, _) in selected.iter().zip(mask).filter(|(_, &m)| m) {
        steps.swap(k, k + 1);
    }
    PathRecord::new(base.start.clone(), steps)
}

/// Build the interchange report for `path` and draw up to `sample_size`
/// distinct family members (all of them when the family is small enough).
/// The returned members always include `path` itself when the whole family
/// is enumerated.
pub fn interchange_family(
    env: &Environment,
    path: &PathRecord,
    sample_size: usize,
    seed: u64,
) -> Result<(InterchangeReport, Vec<PathRecord>)> {
    let base_weight = path_weight(path, env)?;
    let qualifying = path.direction_changes().positions;
    let selected = select_non_interfering(&qualifying);
    let m = selected.len();
    let report = InterchangeReport {
        base_path: path.clone(),
        base_weight,
        qualifying_positions: qualifying,
        selected_positions: selected.clone(),
        family_size: 2f64.powi(m as i32),
        weight_floor: base_weight.saturating_sub(m as u64),
    };

    let mut members = Vec::new();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    if m < 63 && (1u64 << m) <= sample_size as u64 {
        for bits in 0..(1u64 << m) {
            let mask: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
            members.push(apply(path, &selected, &mask));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while members.len() < sample_size {
            let mask: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
            if seen.insert(mask.clone()) {
                members.push(apply(path, &selected, &mask));
            }
        }
    }
    let distinct: HashSet<&Vec<_>> = members.iter().map(|p| &p.steps).collect();
    assert_eq!(distinct.len(), members.len(), "interchange produced a duplicate path");
    Ok((report, members))
}
