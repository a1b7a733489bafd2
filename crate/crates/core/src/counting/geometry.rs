//! Reachable sets and predecessor tables, shared by every DP.
//!
//! Level `t` holds the spatial offsets (relative to the start vertex) of all
//! endpoints of length-`t` paths, sorted lexicographically. For each such
//! offset and each step `s`, `preds` stores the rank at level `t-1` of the
//! in-neighbor reached by undoing `s`, or [`NONE`].

use std::sync::Arc;

use crate::lattice::{GraphMode, Vertex};

pub const NONE: u32 = u32::MAX;

#[derive(Debug)]
pub struct LevelGeom {
    pub t: usize,
    d: usize,
    offsets: Vec<i32>,
    preds: Vec<u32>,
}

impl LevelGeom {
    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.offsets.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    #[inline]
    pub fn offset(&self, j: usize) -> &[i32] {
        &self.offsets[j * self.d..(j + 1) * self.d]
    }

    /// Predecessor ranks of position `j`, one per step in canonical order.
    #[inline]
    pub fn preds(&self, j: usize, degree: usize) -> &[u32] {
        &self.preds[j * degree..(j + 1) * degree]
    }

    /// Rank of a spatial offset, by binary search over the sorted offsets.
    pub fn rank(&self, offset: &[i64]) -> Option<usize> {
        if offset.len() != self.d {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let cmp = self
                .offset(mid)
                .iter()
                .map(|&c| c as i64)
                .cmp(offset.iter().copied());
            match cmp {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }
}

/// Per-level geometry for paths of length `0..=n` in a given mode.
#[derive(Debug, Clone)]
pub struct Geometry {
    mode: GraphMode,
    levels: Vec<Arc<LevelGeom>>,
}

impl Geometry {
    pub fn build(mode: GraphMode, n: usize) -> Self {
        let d = mode.dim();
        let deg = mode.out_degree();
        let deltas: Vec<Vec<i32>> = mode
            .steps()
            .into_iter()
            .map(|s| {
                let mut v = vec![0i32; d];
                if s.axis <= d {
                    v[s.axis - 1] = s.sign as i32;
                }
                v
            })
            .collect();

        let mut levels = Vec::with_capacity(n + 1);
        let mut prev_box: Option<RankBox> = None;
        for t in 0..=n {
            let mut rb = RankBox::new(mode, t);
            let mut preds = Vec::new();
            if let Some(pb) = &prev_box {
                preds.reserve(rb.count * deg);
                let mut x = vec![0i32; d];
                for j in 0..rb.count {
                    let y = &rb.offsets[j * d..(j + 1) * d];
                    for delta in &deltas {
                        for i in 0..d {
                            x[i] = y[i] - delta[i];
                        }
                        preds.push(pb.lookup(&x));
                    }
                }
            }
            let offsets = std::mem::take(&mut rb.offsets);
            levels.push(Arc::new(LevelGeom {
                t,
                d,
                offsets,
                preds,
            }));
            prev_box = Some(rb);
        }
        Geometry { mode, levels }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, t: usize) -> &Arc<LevelGeom> {
        &self.levels[t]
    }

    /// Number of reachable endpoints at level `t`, without building anything.
    /// Equals `(t+1)^d` for `d <= 2` and is smaller beyond.
    pub fn count_at(mode: GraphMode, t: usize) -> u64 {
        let d = mode.dim() as u32;
        match mode {
            GraphMode::SemiOriented(_) => (0..=t)
                .filter(|j| (t - j) % 2 == 0)
                .map(|j| sphere_size(d as u64, j as u64))
                .sum(),
            // compositions of at most t into d non-negative parts: C(t+d, d)
            GraphMode::FullyOriented(_) => {
                let mut c: u64 = 1;
                for i in 1..=d as u64 {
                    c = c * (t as u64 + i) / i;
                }
                c
            }
        }
    }

    /// Approximate bytes held by a geometry for lengths `0..=n`.
    pub fn estimate_bytes(mode: GraphMode, n: usize) -> u64 {
        let per = (mode.dim() * 4 + mode.out_degree() * 4) as u64;
        (0..=n).map(|t| Geometry::count_at(mode, t) * per).sum()
    }

    /// Absolute vertex of position `j` at level `t` for paths from `start`.
    pub fn vertex(&self, start: &Vertex, t: usize, j: usize) -> Vertex {
        let off = self.levels[t].offset(j);
        absolute_vertex(self.mode, start, t, off)
    }
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Points of `Z^d` with ℓ1-norm exactly `j`.
fn sphere_size(d: u64, j: u64) -> u64 {
    if j == 0 {
        return 1;
    }
    (1..=d.min(j))
        .map(|k| (1u64 << k) * binom(d, k) * binom(j - 1, k - 1))
        .sum()
}

pub(crate) fn absolute_vertex(mode: GraphMode, start: &Vertex, t: usize, off: &[i32]) -> Vertex {
    let spatial: Vec<i64> = start
        .spatial
        .iter()
        .zip(off)
        .map(|(s, o)| s + *o as i64)
        .collect();
    let level = match mode {
        GraphMode::SemiOriented(_) => start.level + t as u64,
        GraphMode::FullyOriented(_) => {
            let used: i64 = off.iter().map(|&o| o as i64).sum();
            start.level + t as u64 - used as u64
        }
    };
    Vertex { spatial, level }
}

/// Dense box over the reachable offsets of one level, used only while
/// building the predecessor tables.
struct RankBox {
    lo: i32,
    side: i32,
    d: usize,
    count: usize,
    offsets: Vec<i32>,
    rank: Vec<u32>,
}

impl RankBox {
    fn new(mode: GraphMode, t: usize) -> Self {
        let d = mode.dim();
        let t_i = t as i32;
        let (lo, side) = match mode {
            GraphMode::SemiOriented(_) => (-t_i, 2 * t_i + 1),
            GraphMode::FullyOriented(_) => (0, t_i + 1),
        };
        let total = (side as usize).pow(d as u32);
        let mut rank = vec![NONE; total];
        let mut offsets = Vec::new();
        let mut coord = vec![lo; d];
        let mut count = 0usize;
        for cell in 0..total {
            let reachable = match mode {
                GraphMode::SemiOriented(_) => {
                    let l1: i32 = coord.iter().map(|c| c.abs()).sum();
                    l1 <= t_i && (t_i - l1) % 2 == 0
                }
                GraphMode::FullyOriented(_) => coord.iter().sum::<i32>() <= t_i,
            };
            if reachable {
                rank[cell] = count as u32;
                offsets.extend_from_slice(&coord);
                count += 1;
            }
            // odometer, last axis fastest
            for i in (0..d).rev() {
                coord[i] += 1;
                if coord[i] < lo + side {
                    break;
                }
                coord[i] = lo;
            }
        }
        RankBox {
            lo,
            side,
            d,
            count,
            offsets,
            rank,
        }
    }

    fn lookup(&self, x: &[i32]) -> u32 {
        let mut idx = 0usize;
        for &c in x.iter().take(self.d) {
            let r = c - self.lo;
            if r < 0 || r >= self.side {
                return NONE;
            }
            idx = idx * self.side as usize + r as usize;
        }
        self.rank[idx]
    }
}
