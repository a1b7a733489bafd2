//! The oriented lattice: graph modes, vertices, steps and paths.
//!
//! In semi-oriented mode a vertex is a point of `Z^d` together with a time
//! level, and every edge advances the level by one while moving one unit
//! along a spatial axis. In fully-oriented mode vertices live in
//! `Z_+^{d+1}`; the first `d` coordinates are stored as `spatial` and the
//! last one as `level`, and each edge increments exactly one coordinate.

mod environment;

pub use environment::{derive_seed, Environment, EnvironmentConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", content = "d", rename_all = "snake_case")]
pub enum GraphMode {
    SemiOriented(usize),
    FullyOriented(usize),
}

impl GraphMode {
    pub fn semi(d: usize) -> Self {
        GraphMode::SemiOriented(d)
    }

    pub fn full(d: usize) -> Self {
        GraphMode::FullyOriented(d)
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        match *self {
            GraphMode::SemiOriented(d) | GraphMode::FullyOriented(d) => d,
        }
    }

    pub fn out_degree(&self) -> usize {
        match *self {
            GraphMode::SemiOriented(d) => 2 * d,
            GraphMode::FullyOriented(d) => d + 1,
        }
    }

    pub fn is_semi(&self) -> bool {
        matches!(self, GraphMode::SemiOriented(_))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(LppError::Config("dimension d must be positive".into()));
        }
        Ok(())
    }

    /// All steps leaving a vertex, in canonical order: `+e_1, -e_1, +e_2, ...`
    /// for semi-oriented mode and `e_1, ..., e_{d+1}` for fully-oriented mode.
    pub fn steps(&self) -> Vec<Step> {
        match *self {
            GraphMode::SemiOriented(d) => (1..=d)
                .flat_map(|axis| [Step::new(axis, 1), Step::new(axis, -1)])
                .collect(),
            GraphMode::FullyOriented(d) => (1..=d + 1).map(|axis| Step::new(axis, 1)).collect(),
        }
    }

    pub fn is_valid_step(&self, step: Step) -> bool {
        match *self {
            GraphMode::SemiOriented(d) => (1..=d).contains(&step.axis) && step.sign.abs() == 1,
            GraphMode::FullyOriented(d) => (1..=d + 1).contains(&step.axis) && step.sign == 1,
        }
    }

    /// Short name used in configuration files and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            GraphMode::SemiOriented(_) => "semi",
            GraphMode::FullyOriented(_) => "full",
        }
    }

    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        let mode = match name {
            "semi" => GraphMode::SemiOriented(d),
            "full" => GraphMode::FullyOriented(d),
            other => return Err(LppError::Config(format!("unknown mode {other:?}"))),
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// A lattice point. Ordering compares spatial coordinates axis by axis and
/// then the level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub spatial: Vec<i64>,
    pub level: u64,
}

impl Vertex {
    pub fn new(spatial: Vec<i64>, level: u64) -> Self {
        Vertex { spatial, level }
    }

    pub fn origin(d: usize) -> Self {
        Vertex {
            spatial: vec![0; d],
            level: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    /// ℓ1-norm of the spatial part only.
    pub fn spatial_l1(&self) -> u64 {
        self.spatial.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// ℓ1-norm of the full coordinate vector.
    pub fn l1_norm(&self) -> u64 {
        self.spatial_l1() + self.level
    }

    /// The out-neighbor reached by `step`. Semi-oriented steps always
    /// advance the level; in fully-oriented mode only axis `d+1` does.
    pub fn step_in(&self, step: Step, mode: GraphMode) -> Vertex {
        let mut next = self.clone();
        if step.axis <= self.dim() {
            next.spatial[step.axis - 1] += step.sign as i64;
        }
        match mode {
            GraphMode::SemiOriented(_) => next.level += 1,
            GraphMode::FullyOriented(d) => {
                if step.axis == d + 1 {
                    next.level += 1;
                }
            }
        }
        next
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:(", self.level)?;
        for (i, c) in self.spatial.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Vertex {
    type Err = LppError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LppError::Parse(format!("expected \"level:(c1,...,cd)\", got {s:?}"));
        let (level, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let level: u64 = level.trim().parse().map_err(|_| bad())?;
        let inner = rest
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let spatial = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|c| c.trim().parse::<i64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Vertex { spatial, level })
    }
}

/// One oriented edge direction. `axis` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub axis: usize,
    pub sign: i8,
}

impl Step {
    pub fn new(axis: usize, sign: i8) -> Self {
        Step { axis, sign }
    }
}

pub fn out_neighbors(v: &Vertex, mode: GraphMode) -> Vec<Vertex> {
    mode.steps().into_iter().map(|s| v.step_in(s, mode)).collect()
}

/// A start vertex plus a sequence of steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PathRecord {
    pub start: Vertex,
    pub steps: Vec<Step>,
}

impl PathRecord {
    pub fn new(start: Vertex, steps: Vec<Step>) -> Self {
        PathRecord { start, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self, mode: GraphMode) -> Result<()> {
        if self.start.dim() != mode.dim() {
            return Err(LppError::InvalidPath(format!(
                "start vertex has dimension {}, mode has {}",
                self.start.dim(),
                mode.dim()
            )));
        }
        if let GraphMode::FullyOriented(_) = mode {
            if let Some(c) = self.start.spatial.iter().find(|c| **c < 0) {
                return Err(LppError::InvalidPath(format!(
                    "fully-oriented vertices are non-negative, start has coordinate {c}"
                )));
            }
        }
        for (i, s) in self.steps.iter().enumerate() {
            if !mode.is_valid_step(*s) {
                return Err(LppError::InvalidPath(format!(
                    "step {i} (axis {}, sign {}) is not an edge in {} mode",
                    s.axis,
                    s.sign,
                    mode.name()
                )));
            }
        }
        Ok(())
    }

    /// Visited vertices `π_0, ..., π_n`.
    pub fn vertices(&self, mode: GraphMode) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut v = self.start.clone();
        out.push(v.clone());
        for s in &self.steps {
            v = v.step_in(*s, mode);
            out.push(v.clone());
        }
        out
    }

    pub fn endpoint(&self, mode: GraphMode) -> Vertex {
        self.steps
            .iter()
            .fold(self.start.clone(), |v, s| v.step_in(*s, mode))
    }

    /// Positions `k` (0-based) where step `k+1` differs from step `k`.
    pub fn direction_changes(&self) -> DirectionChanges {
        let positions: Vec<usize> = self
            .steps
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(k, _)| k)
            .collect();
        DirectionChanges {
            count: positions.len(),
            positions,
        }
    }

    /// Swap steps `k` and `k+1`.
    pub fn interchanged(&self, k: usize) -> PathRecord {
        let mut steps = self.steps.clone();
        steps.swap(k, k + 1);
        PathRecord {
            start: self.start.clone(),
            steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DirectionChanges {
    pub count: usize,
    pub positions: Vec<usize>,
}

/// `W(π)`: the number of good vertices among `π_1, ..., π_n`. The start
/// vertex does not count.
pub fn path_weight(path: &PathRecord, env: &Environment) -> Result<u64> {
    path.validate(env.mode())?;
    let mode = env.mode();
    let mut v = path.start.clone();
    let mut w = 0u64;
    for s in &path.steps {
        v = v.step_in(*s, mode);
        env.check_bounds(&v)?;
        w += env.good_bit(&v) as u64;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn semi_neighbors_d1() {
        let n = out_neighbors(&Vertex::origin(1), GraphMode::semi(1));
        assert_eq!(n, vec![Vertex::new(vec![1], 1), Vertex::new(vec![-1], 1)]);
    }

    #[test]
    fn semi_neighbors_d2() {
        let n: HashSet<_> = out_neighbors(&Vertex::origin(2), GraphMode::semi(2))
            .into_iter()
            .collect();
        let want: HashSet<_> = [
            Vertex::new(vec![1, 0], 1),
            Vertex::new(vec![-1, 0], 1),
            Vertex::new(vec![0, 1], 1),
            Vertex::new(vec![0, -1], 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(n, want);
    }

    #[test]
    fn full_neighbors_d1() {
        let n = out_neighbors(&Vertex::origin(1), GraphMode::full(1));
        assert_eq!(n, vec![Vertex::new(vec![1], 0), Vertex::new(vec![0], 1)]);
    }

    #[test]
    fn neighbors_are_distinct_and_counted() {
        for d in 1..=4 {
            for mode in [GraphMode::semi(d), GraphMode::full(d)] {
                let v = Vertex::new((0..d as i64).collect(), 3);
                let n = out_neighbors(&v, mode);
                assert_eq!(n.len(), mode.out_degree());
                let set: HashSet<_> = n.iter().collect();
                assert_eq!(set.len(), n.len());
                for w in &n {
                    if mode.is_semi() {
                        assert_eq!(w.level, v.level + 1);
                    } else {
                        assert_eq!(w.l1_norm(), v.l1_norm() + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn vertex_text_round_trip() {
        let v = Vertex::new(vec![-3, 0, 12], 7);
        assert_eq!(v.to_string(), "7:(-3,0,12)");
        assert_eq!("7:(-3,0,12)".parse::<Vertex>().unwrap(), v);
        assert_eq!(" 0:( 1 , -1 )".parse::<Vertex>().unwrap(), Vertex::new(vec![1, -1], 0));
        assert!("7(1,2)".parse::<Vertex>().is_err());
        assert!("x:(1)".parse::<Vertex>().is_err());
    }

    #[test]
    fn invalid_steps_rejected() {
        let p = PathRecord::new(Vertex::origin(1), vec![Step::new(2, 1)]);
        assert!(p.validate(GraphMode::semi(1)).is_err());
        let p = PathRecord::new(Vertex::origin(1), vec![Step::new(1, -1)]);
        assert!(p.validate(GraphMode::full(1)).is_err());
        assert!(p.validate(GraphMode::semi(1)).is_ok());
        let p = PathRecord::new(Vertex::origin(1), vec![Step::new(1, 2)]);
        assert!(p.validate(GraphMode::semi(1)).is_err());
    }

    #[test]
    fn direction_changes_simple() {
        let straight = PathRecord::new(Vertex::origin(1), vec![Step::new(1, 1); 6]);
        assert_eq!(straight.direction_changes().count, 0);
        let alt: Vec<_> = (0..7)
            .map(|i| Step::new(1, if i % 2 == 0 { 1 } else { -1 }))
            .collect();
        let alt = PathRecord::new(Vertex::origin(1), alt);
        let dc = alt.direction_changes();
        assert_eq!(dc.count, 6);
        assert_eq!(dc.positions, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn interchange_moves_one_vertex() {
        let steps = vec![Step::new(1, 1), Step::new(2, -1), Step::new(1, 1)];
        let p = PathRecord::new(Vertex::origin(2), steps);
        let q = p.interchanged(0);
        let mode = GraphMode::semi(2);
        let (a, b) = (p.vertices(mode), q.vertices(mode));
        let diffs: Vec<_> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diffs, vec![1]);
    }
}
