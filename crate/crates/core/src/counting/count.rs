//! Joint (endpoint, weight) path-count tables.
//!
//! Layer `t` stores, for every reachable endpoint `y`, the number of
//! length-`t` paths from the start vertex that end at `y` and visit exactly
//! `k` good vertices (the start excluded). Layers are built by pulling from
//! in-neighbors:
//!
//! ```text
//! C_{t+1}(y, k + good(y)) += C_t(x, k)   for every in-neighbor x of y
//! ```
//!
//! With a `k_cap` of `K` the top slot accumulates every weight `>= K`, which
//! is enough to answer threshold queries up to `K` at a fraction of the cost.

use std::sync::Arc;

use num_bigint::BigUint;
use rayon::prelude::*;

use super::cell::{Backend, Cell, CountValue, WideFloat, Storage, U256};
use super::geometry::{absolute_vertex, Geometry, LevelGeom, NONE};
use super::{good_bits, threshold, DpOptions};
use crate::error::{LppError, Result};
use crate::lattice::{Environment, GraphMode, Vertex};

const PAR_CELLS: usize = 1 << 15;

#[derive(Debug, Clone)]
enum CountData {
    U128(Vec<u128>),
    U256(Vec<U256>),
    Big(Vec<BigUint>),
    Log(Vec<WideFloat>),
}

macro_rules! with_cells {
    ($data:expr, $v:ident => $body:expr) => {
        match $data {
            CountData::U128($v) => $body,
            CountData::U256($v) => $body,
            CountData::Big($v) => $body,
            CountData::Log($v) => $body,
        }
    };
}

trait Stored: Cell {
    fn wrap(v: Vec<Self>) -> CountData;
    fn unwrap(d: &CountData) -> &[Self];
}

macro_rules! stored {
    ($t:ty, $variant:ident) => {
        impl Stored for $t {
            fn wrap(v: Vec<Self>) -> CountData {
                CountData::$variant(v)
            }
            fn unwrap(d: &CountData) -> &[Self] {
                match d {
                    CountData::$variant(v) => v,
                    _ => unreachable!("storage mismatch"),
                }
            }
        }
    };
}

stored!(u128, U128);
stored!(U256, U256);
stored!(BigUint, Big);
stored!(WideFloat, Log);

/// One level of the count table.
#[derive(Debug, Clone)]
pub struct CountLayer {
    level: usize,
    start: Vertex,
    mode: GraphMode,
    geom: Arc<LevelGeom>,
    width: usize,
    k_cap: Option<usize>,
    data: CountData,
}

impl CountLayer {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn start(&self) -> &Vertex {
        &self.start
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    /// Number of weight slots per endpoint.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k_cap(&self) -> Option<usize> {
        self.k_cap
    }

    pub fn storage(&self) -> Storage {
        match self.data {
            CountData::U128(_) => Storage::U128,
            CountData::U256(_) => Storage::U256,
            CountData::Big(_) => Storage::Big,
            CountData::Log(_) => Storage::Log,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.storage().is_exact()
    }

    /// Number of reachable endpoints.
    pub fn endpoints(&self) -> usize {
        self.geom.len()
    }

    fn rank_of(&self, y: &Vertex) -> Option<usize> {
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
        let expected = absolute_vertex(self.mode, &self.start, self.level, self.geom.offset(j));
        (expected.level == y.level).then_some(j)
    }

    fn endpoint(&self, j: usize) -> Vertex {
        absolute_vertex(self.mode, &self.start, self.level, self.geom.offset(j))
    }

    /// `C_t(y, k)`. With a cap `K`, `k == K` reads the `>= K` bucket.
    /// Unreachable endpoints and out-of-range weights read as zero.
    pub fn count(&self, y: &Vertex, k: usize) -> CountValue {
        let w = self.width;
        let idx = self.rank_of(y).filter(|_| k < w).map(|j| j * w + k);
        with_cells!(&self.data, v => sum_cells(idx.iter().map(|&i| &v[i])))
    }

    /// Counts at endpoint `y` for `k = 0..width`, or `None` if unreachable.
    pub fn column(&self, y: &Vertex) -> Option<Vec<CountValue>> {
        let j = self.rank_of(y)?;
        Some(self.column_at(j))
    }

    fn column_at(&self, j: usize) -> Vec<CountValue> {
        let w = self.width;
        with_cells!(&self.data, v => v[j * w..(j + 1) * w].iter().map(|c| c.value()).collect())
    }

    /// Every reachable endpoint with its weight column, in lexicographic
    /// order of the endpoint.
    pub fn entries(&self) -> Vec<(Vertex, Vec<CountValue>)> {
        (0..self.endpoints())
            .map(|j| (self.endpoint(j), self.column_at(j)))
            .collect()
    }

    /// Sum over every endpoint and weight.
    pub fn total(&self) -> CountValue {
        with_cells!(&self.data, v => sum_cells(v.iter()))
    }

    fn check_kmin(&self, kmin: usize) -> Result<()> {
        match self.k_cap {
            Some(cap) if kmin > cap && kmin <= self.level => Err(LppError::Config(format!(
                "threshold {kmin} exceeds the table's weight cap {cap}"
            ))),
            _ => Ok(()),
        }
    }

    /// Number of paths with `W >= kmin`.
    pub fn at_least(&self, kmin: usize) -> Result<CountValue> {
        self.check_kmin(kmin)?;
        let w = self.width;
        Ok(with_cells!(&self.data, v => {
            if kmin >= w {
                sum_cells(v[..0].iter())
            } else {
                sum_cells(v.chunks_exact(w).flat_map(|row| row[kmin..].iter()))
            }
        }))
    }

    /// Number of paths ending at `y` with `W >= kmin`.
    pub fn at_least_at(&self, y: &Vertex, kmin: usize) -> Result<CountValue> {
        self.check_kmin(kmin)?;
        let w = self.width;
        let j = self.rank_of(y);
        Ok(with_cells!(&self.data, v => match j {
            Some(j) if kmin < w => sum_cells(v[j * w + kmin..(j + 1) * w].iter()),
            _ => sum_cells(v[..0].iter()),
        }))
    }

    /// Number of endpoints carrying at least one path with `W >= kmin`.
    pub fn endpoints_reached(&self, kmin: usize) -> usize {
        let w = self.width;
        if kmin >= w {
            return 0;
        }
        with_cells!(&self.data, v => v
            .chunks_exact(w)
            .filter(|row| row[kmin..].iter().any(|c| !c.is_zero()))
            .count())
    }

    /// Largest `k` with a nonzero count anywhere in the layer.
    pub fn max_nonzero_k(&self) -> Option<usize> {
        let w = self.width;
        with_cells!(&self.data, v => (0..w)
            .rev()
            .find(|&k| v.chunks_exact(w).any(|row| !row[k].is_zero())))
    }
}

fn sum_cells<'a, C: Cell + 'a>(it: impl Iterator<Item = &'a C>) -> CountValue {
    let mut acc = C::zero();
    for c in it {
        acc.add(c);
    }
    acc.value()
}

fn layer_width(t: usize, cap: Option<usize>) -> usize {
    match cap {
        Some(k) => t.min(k) + 1,
        None => t + 1,
    }
}

fn advance<C: Cell>(
    prev: &[C],
    prev_w: usize,
    geom: &LevelGeom,
    degree: usize,
    good: &[bool],
    width: usize,
) -> Vec<C> {
    let count = geom.len();
    let mut out = vec![C::zero(); count * width];
    let fill = |j: usize, row: &mut [C]| {
        let shift = good[j] as usize;
        for &r in geom.preds(j, degree) {
            if r == NONE {
                continue;
            }
            let r = r as usize;
            let src = &prev[r * prev_w..(r + 1) * prev_w];
            for (k, c) in src.iter().enumerate() {
                if !c.is_zero() {
                    row[(k + shift).min(width - 1)].add(c);
                }
            }
        }
    };
    if count * width >= PAR_CELLS {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| fill(j, row));
    } else {
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| fill(j, row));
    }
    out
}

/// Bytes needed to hold layers `0..=n` (or two consecutive layers when
/// `history` is false), checked against the budget level by level.
pub fn check_count_budget(
    mode: GraphMode,
    n: usize,
    storage: Storage,
    k_cap: Option<usize>,
    history: bool,
    budget: u64,
) -> Result<u64> {
    let geom = Geometry::estimate_bytes(mode, n);
    let log_deg = (mode.out_degree() as f64).log2();
    let layer = |t: usize| {
        Geometry::count_at(mode, t)
            * layer_width(t, k_cap) as u64
            * storage.entry_bytes(t as f64 * log_deg)
    };
    let mut held = 0u64;
    let mut prev = 0u64;
    let mut peak = geom;
    for t in 0..=n {
        let cur = layer(t);
        let need = if history {
            held += cur;
            geom + held
        } else {
            geom + prev + cur
        };
        if need > budget {
            return Err(LppError::Resource {
                level: t,
                required: need,
                budget,
            });
        }
        peak = peak.max(need);
        prev = cur;
    }
    Ok(peak)
}

/// Run the count DP from `start` for `n` steps, calling `visit` on every
/// layer `t = 0..=n`, and return the final layer. Only two layers are alive
/// at a time.
pub fn run_counts(
    env: &Environment,
    start: &Vertex,
    n: usize,
    opts: &DpOptions,
    geom: &Geometry,
    mut visit: impl FnMut(&CountLayer) -> Result<()>,
) -> Result<CountLayer> {
    let mode = env.mode();
    if geom.mode() != mode || geom.max_level() < n {
        return Err(LppError::Config(format!(
            "geometry covers {:?} up to {}, need {:?} up to {n}",
            geom.mode(),
            geom.max_level(),
            mode
        )));
    }
    if start.dim() != mode.dim() {
        return Err(LppError::Config("start vertex dimension mismatch".into()));
    }
    env.check_reach(start, n)?;
    let storage = opts.backend.resolve(n, mode.out_degree())?;
    check_count_budget(mode, n, storage, opts.k_cap, opts.keep_history, opts.memory_budget)?;
    match storage {
        Storage::U128 => run_typed::<u128>(env, start, n, opts, geom, &mut visit),
        Storage::U256 => run_typed::<U256>(env, start, n, opts, geom, &mut visit),
        Storage::Big => run_typed::<BigUint>(env, start, n, opts, geom, &mut visit),
        Storage::Log => run_typed::<WideFloat>(env, start, n, opts, geom, &mut visit),
    }
}

fn run_typed<C: Stored>(
    env: &Environment,
    start: &Vertex,
    n: usize,
    opts: &DpOptions,
    geom: &Geometry,
    visit: &mut dyn FnMut(&CountLayer) -> Result<()>,
) -> Result<CountLayer> {
    let mode = env.mode();
    let degree = mode.out_degree();
    let mut layer = CountLayer {
        level: 0,
        start: start.clone(),
        mode,
        geom: geom.level(0).clone(),
        width: 1,
        k_cap: opts.k_cap,
        data: C::wrap(vec![C::one()]),
    };
    visit(&layer)?;
    for t in 1..=n {
        let lg = geom.level(t);
        let good = good_bits(env, start, t, lg);
        let width = layer_width(t, opts.k_cap);
        let next = advance(C::unwrap(&layer.data), layer.width, lg, degree, &good, width);
        layer = CountLayer {
            level: t,
            start: start.clone(),
            mode,
            geom: lg.clone(),
            width,
            k_cap: opts.k_cap,
            data: C::wrap(next),
        };
        visit(&layer)?;
    }
    Ok(layer)
}

/// Full table history `t = 0..=n` from `start`.
pub fn count_layers(
    env: &Environment,
    start: &Vertex,
    n: usize,
    opts: &DpOptions,
    geom: &Geometry,
) -> Result<Vec<CountLayer>> {
    let opts = DpOptions {
        keep_history: true,
        ..opts.clone()
    };
    let mut out = Vec::with_capacity(n + 1);
    run_counts(env, start, n, &opts, geom, |l| {
        out.push(l.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Count tables for every length `0..=n` from the origin, with the default
/// backend and budget.
pub fn build_count_layers(env: &Environment, n: usize) -> Result<Vec<CountLayer>> {
    let geom = Geometry::build(env.mode(), n);
    let start = Vertex::origin(env.mode().dim());
    count_layers(env, &start, n, &DpOptions::default(), &geom)
}

/// Final layer only, from the origin.
pub fn final_count_layer(env: &Environment, n: usize, opts: &DpOptions) -> Result<CountLayer> {
    let geom = Geometry::build(env.mode(), n);
    let start = Vertex::origin(env.mode().dim());
    let opts = DpOptions {
        keep_history: false,
        ..opts.clone()
    };
    run_counts(env, &start, n, &opts, &geom, |_| Ok(()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LppError::Domain(format!("alpha must lie in [0,1], got {alpha}")));
    }
    Ok(())
}

/// `N_n(α)`: paths of length `n = layer.level()` with `W >= α n`.
pub fn count_n(layer: &CountLayer, alpha: f64) -> Result<CountValue> {
    check_alpha(alpha)?;
    layer.at_least(threshold(alpha, layer.level()))
}

/// `N_n(x, y; α)`: as [`count_n`] restricted to paths ending at `y`.
pub fn count_n_xy(layer: &CountLayer, alpha: f64, y: &Vertex) -> Result<CountValue> {
    check_alpha(alpha)?;
    layer.at_least_at(y, threshold(alpha, layer.level()))
}

/// Rough peak memory of the count DP, for dry runs.
pub fn estimate_count_bytes(mode: GraphMode, n: usize, backend: Backend, k_cap: Option<usize>) -> Result<u64> {
    let storage = backend.resolve(n, mode.out_degree())?;
    check_count_budget(mode, n, storage, k_cap, false, u64::MAX)
}
