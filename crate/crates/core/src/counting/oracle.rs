//! Brute-force path enumeration. Ground truth for the DPs on small cases.

use std::collections::BTreeMap;

use crate::error::{LppError, Result};
use crate::lattice::{Environment, Step, Vertex};

pub const DEFAULT_ORACLE_CAP: u64 = 10_000_000;

/// Visit every length-`n` path from `start`. The visitor receives the step
/// sequence, the endpoint and `W(π)`. Returns the number of paths visited.
pub fn enumerate_paths<F>(env: &Environment, start: &Vertex, n: usize, cap: u64, mut visit: F) -> Result<u64>
where
    F: FnMut(&[Step], &Vertex, u64),
{
    let mode = env.mode();
    let total = (mode.out_degree() as f64).powi(n as i32);
    if total > cap as f64 {
        return Err(LppError::OracleCap { paths: total, cap });
    }
    env.check_reach(start, n)?;
    let steps = mode.steps();
    let mut path = Vec::with_capacity(n);
    let mut visited = 0u64;

    fn rec<F: FnMut(&[Step], &Vertex, u64)>(
        env: &Environment,
        steps: &[Step],
        v: &Vertex,
        w: u64,
        remaining: usize,
        path: &mut Vec<Step>,
        visited: &mut u64,
        visit: &mut F,
    ) {
        if remaining == 0 {
            *visited += 1;
            visit(path, v, w);
            return;
        }
        for &s in steps {
            let next = v.step_in(s, env.mode());
            let g = env.good_bit(&next) as u64;
            path.push(s);
            rec(env, steps, &next, w + g, remaining - 1, path, visited, visit);
            path.pop();
        }
    }

    rec(env, &steps, start, 0, n, &mut path, &mut visited, &mut visit);
    Ok(visited)
}

/// Joint (endpoint, weight) histogram of all length-`n` paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTable {
    pub n: usize,
    pub paths: u64,
    pub table: BTreeMap<(Vertex, u64), u64>,
    pub max_weight: u64,
}

impl OracleTable {
    pub fn at_least(&self, kmin: u64) -> u64 {
        self.table
            .iter()
            .filter(|((_, k), _)| *k >= kmin)
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn at_least_at(&self, y: &Vertex, kmin: u64) -> u64 {
        self.table
            .iter()
            .filter(|((v, k), _)| v == y && *k >= kmin)
            .map(|(_, c)| *c)
            .sum()
    }
}

pub fn oracle_table(env: &Environment, start: &Vertex, n: usize, cap: u64) -> Result<OracleTable> {
    let mut table = BTreeMap::new();
    let mut max_weight = 0;
    let paths = enumerate_paths(env, start, n, cap, |_, end, w| {
        *table.entry((end.clone(), w)).or_insert(0u64) += 1;
        max_weight = max_weight.max(w);
    })?;
    Ok(OracleTable {
        n,
        paths,
        table,
        max_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GraphMode;

    #[test]
    fn empty_path() {
        let env = Environment::new(1, 0.5, GraphMode::semi(2)).unwrap();
        let t = oracle_table(&env, &Vertex::origin(2), 0, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(t.paths, 1);
        assert_eq!(t.table.get(&(Vertex::origin(2), 0)), Some(&1));
    }

    #[test]
    fn counts_all_paths() {
        let env = Environment::new(1, 0.5, GraphMode::semi(1)).unwrap();
        let n = enumerate_paths(&env, &Vertex::origin(1), 3, DEFAULT_ORACLE_CAP, |_, _, _| ()).unwrap();
        assert_eq!(n, 8);
    }

    #[test]
    fn refuses_over_cap() {
        let env = Environment::new(1, 0.5, GraphMode::semi(2)).unwrap();
        let err = enumerate_paths(&env, &Vertex::origin(2), 12, DEFAULT_ORACLE_CAP, |_, _, _| ()).unwrap_err();
        assert!(matches!(err, LppError::OracleCap { .. }));
        assert!(err.to_string().contains("exceeds cap"));
    }
}
