//! Maximal path weight per endpoint: `M_{t+1}(y) = good(y) + max_x M_t(x)`
//! over in-neighbors `x`.

use std::sync::Arc;

use super::geometry::{absolute_vertex, Geometry, LevelGeom, NONE};
use super::{good_bits, DEFAULT_MEMORY_BUDGET};
use crate::error::{LppError, Result};
use crate::lattice::{Environment, GraphMode, PathRecord, Vertex};

#[derive(Debug, Clone)]
pub struct MaxWeightLayer {
    level: usize,
    start: Vertex,
    mode: GraphMode,
    geom: Arc<LevelGeom>,
    values: Vec<u32>,
}

impl MaxWeightLayer {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// `M_t(x, *)`.
    pub fn max(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0) as u64
    }

    /// `M_t(x, y)`, or `None` when `y` is unreachable.
    pub fn get(&self, y: &Vertex) -> Option<u64> {
        if y.dim() != self.start.dim() {
            return None;
        }
        let off: Vec<i64> = y
            .spatial
            .iter()
            .zip(&self.start.spatial)
            .map(|(a, b)| a - b)
            .collect();
        let j = self.geom.rank(&off)?;
        (self.endpoint(j).level == y.level).then(|| self.values[j] as u64)
    }

    fn endpoint(&self, j: usize) -> Vertex {
        absolute_vertex(self.mode, &self.start, self.level, self.geom.offset(j))
    }

    pub fn entries(&self) -> Vec<(Vertex, u64)> {
        (0..self.values.len())
            .map(|j| (self.endpoint(j), self.values[j] as u64))
            .collect()
    }

    fn argmax_rank(&self) -> usize {
        let m = self.max() as u32;
        // offsets are stored in lexicographic order
        self.values.iter().position(|&v| v == m).unwrap_or(0)
    }

    /// The lexicographically least endpoint attaining the layer maximum.
    pub fn argmax_endpoint_lex(&self) -> Vertex {
        self.endpoint(self.argmax_rank())
    }
}

fn check_max_budget(mode: GraphMode, n: usize, history: bool, budget: u64) -> Result<()> {
    let mut need = Geometry::estimate_bytes(mode, n);
    let mut prev = 0u64;
    for t in 0..=n {
        let cur = Geometry::count_at(mode, t) * 4;
        let total = if history {
            need += cur;
            need
        } else {
            need + prev + cur
        };
        if total > budget {
            return Err(LppError::Resource {
                level: t,
                required: total,
                budget,
            });
        }
        prev = cur;
    }
    Ok(())
}

/// Run the max-weight DP from `start`, calling `visit` on each layer
/// `t = 0..=n`, and return the final layer.
pub fn run_max(
    env: &Environment,
    start: &Vertex,
    n: usize,
    geom: &Geometry,
    memory_budget: u64,
    mut visit: impl FnMut(&MaxWeightLayer),
) -> Result<MaxWeightLayer> {
    let mode = env.mode();
    if geom.mode() != mode || geom.max_level() < n {
        return Err(LppError::Config("geometry does not cover the requested length".into()));
    }
    env.check_reach(start, n)?;
    check_max_budget(mode, n, false, memory_budget)?;
    let degree = mode.out_degree();
    let mut layer = MaxWeightLayer {
        level: 0,
        start: start.clone(),
        mode,
        geom: geom.level(0).clone(),
        values: vec![0],
    };
    visit(&layer);
    for t in 1..=n {
        let lg = geom.level(t);
        let good = good_bits(env, start, t, lg);
        let prev = &layer.values;
        let values: Vec<u32> = (0..lg.len())
            .map(|j| {
                let best = lg
                    .preds(j, degree)
                    .iter()
                    .filter(|&&r| r != NONE)
                    .map(|&r| prev[r as usize])
                    .max()
                    .expect("every reachable vertex has an in-neighbor");
                best + good[j] as u32
            })
            .collect();
        layer = MaxWeightLayer {
            level: t,
            start: start.clone(),
            mode,
            geom: lg.clone(),
            values,
        };
        visit(&layer);
    }
    Ok(layer)
}

/// Max-weight layers `t = 0..=n` from `start`.
pub fn max_layers(env: &Environment, start: &Vertex, n: usize, geom: &Geometry) -> Result<Vec<MaxWeightLayer>> {
    check_max_budget(env.mode(), n, true, DEFAULT_MEMORY_BUDGET)?;
    let mut out = Vec::with_capacity(n + 1);
    run_max(env, start, n, geom, DEFAULT_MEMORY_BUDGET, |l| out.push(l.clone()))?;
    Ok(out)
}

/// Max-weight layers from the origin.
pub fn build_max_layers(env: &Environment, n: usize) -> Result<Vec<MaxWeightLayer>> {
    let geom = Geometry::build(env.mode(), n);
    max_layers(env, &Vertex::origin(env.mode().dim()), n, &geom)
}

/// `max_{|π|=n, π_0=0} W(π)`.
pub fn max_weight(env: &Environment, n: usize) -> Result<u64> {
    let geom = Geometry::build(env.mode(), n);
    let start = Vertex::origin(env.mode().dim());
    Ok(run_max(env, &start, n, &geom, DEFAULT_MEMORY_BUDGET, |_| ())?.max())
}

/// Maximal weight at every length `0..=n`, keeping two layers alive.
pub fn max_weight_profile(
    env: &Environment,
    start: &Vertex,
    n: usize,
    geom: &Geometry,
    memory_budget: u64,
) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(n + 1);
    run_max(env, start, n, geom, memory_budget, |l| out.push(l.max()))?;
    Ok(out)
}

/// A maximal-weight path of length `n` from `start`, ending at the
/// lexicographically least maximizing endpoint. Ties during backtracking go
/// to the lexicographically least in-neighbor.
pub fn max_weight_path(env: &Environment, start: &Vertex, n: usize, geom: &Geometry) -> Result<PathRecord> {
    let layers = max_layers(env, start, n, geom)?;
    let mode = env.mode();
    let degree = mode.out_degree();
    let steps = mode.steps();
    let mut j = layers[n].argmax_rank();
    let mut rev = Vec::with_capacity(n);
    for t in (1..=n).rev() {
        let here = layers[t].endpoint(j);
        let target = layers[t].values[j] - env.good_bit(&here) as u32;
        let prev = &layers[t - 1].values;
        // lower rank is lexicographically smaller at a fixed level
        let (s, r) = geom
            .level(t)
            .preds(j, degree)
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != NONE && prev[r as usize] == target)
            .min_by_key(|(_, &r)| r)
            .map(|(s, &r)| (s, r as usize))
            .expect("backtrack found no predecessor");
        rev.push(steps[s]);
        j = r;
    }
    rev.reverse();
    Ok(PathRecord::new(start.clone(), rev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::path_weight;

    #[test]
    fn all_good_max_is_n() {
        let env = Environment::all_good(GraphMode::semi(2));
        assert_eq!(max_weight(&env, 7).unwrap(), 7);
    }

    #[test]
    fn symmetric_tie_goes_left() {
        let env = Environment::all_good(GraphMode::semi(1));
        let layers = build_max_layers(&env, 1).unwrap();
        assert_eq!(layers[1].argmax_endpoint_lex(), Vertex::new(vec![-1], 1));
    }

    #[test]
    fn reconstructed_path_attains_max() {
        for seed in 0..20 {
            for mode in [GraphMode::semi(1), GraphMode::semi(2), GraphMode::full(2)] {
                let env = Environment::new(seed, 0.3, mode).unwrap();
                let geom = Geometry::build(mode, 15);
                let start = Vertex::origin(mode.dim());
                let path = max_weight_path(&env, &start, 15, &geom).unwrap();
                let layers = max_layers(&env, &start, 15, &geom).unwrap();
                assert_eq!(path.len(), 15);
                assert_eq!(path_weight(&path, &env).unwrap(), layers[15].max());
                assert_eq!(path.endpoint(mode), layers[15].argmax_endpoint_lex());
            }
        }
    }

    #[test]
    fn get_matches_entries() {
        let env = Environment::new(4, 0.4, GraphMode::semi(2)).unwrap();
        let layers = build_max_layers(&env, 6).unwrap();
        for (v, m) in layers[6].entries() {
            assert_eq!(layers[6].get(&v), Some(m));
            assert!(m <= 6);
        }
        assert_eq!(layers[6].get(&Vertex::new(vec![1, 0], 6)), None);
    }
}
