//! Probability that two independent oriented walks from the origin ever
//! occupy the same vertex.
//!
//! Both walks advance time together, so they meet exactly when their spatial
//! difference returns to zero. The difference performs a random walk whose
//! step is `e - e'` for independent uniform steps `e, e'`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnnealedParams;
use crate::lattice::derive_seed;
use crate::lattice::GraphMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RhoOptions {
    /// Horizon `T` of the exact lower bound.
    pub horizon: usize,
    pub mc_samples: u64,
    /// Longest simulated walk in the Monte Carlo estimate.
    pub mc_horizon: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RhoEstimate {
    /// `P{meet at some 1 <= n <= T}`, exact.
    pub lower_bound: f64,
    /// Monte Carlo frequency of meeting within `mc_horizon`.
    pub point_estimate: f64,
    pub horizon: usize,
    pub mc_samples: u64,
    pub mc_horizon: usize,
    pub mc_hits: u64,
    pub mc_stderr: f64,
}

/// Spatial step vectors of one walk, in a space of dimension `d` (semi) or
/// `d + 1` (full).
fn walk_steps(mode: GraphMode) -> Vec<Vec<i32>> {
    let (dim, steps) = match mode {
        GraphMode::SemiOriented(d) => (d, mode.steps()),
        GraphMode::FullyOriented(d) => (d + 1, mode.steps()),
    };
    steps
        .into_iter()
        .map(|s| {
            let mut v = vec![0; dim];
            v[s.axis - 1] = s.sign as i32;
            v
        })
        .collect()
}

/// Distribution of the difference step, merged by offset.
fn difference_kernel(mode: GraphMode) -> Vec<(Vec<i32>, f64)> {
    let steps = walk_steps(mode);
    let w = 1.0 / (steps.len() * steps.len()) as f64;
    let mut kernel: Vec<(Vec<i32>, f64)> = Vec::new();
    for a in &steps {
        for b in &steps {
            let diff: Vec<i32> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            match kernel.iter_mut().find(|(v, _)| *v == diff) {
                Some((_, q)) => *q += w,
                None => kernel.push((diff, w)),
            }
        }
    }
    kernel
}

/// `P{first meeting time <= n}` for `n = 1..=horizon`, by exact propagation
/// of the un-met difference-walk mass. Mass that can no longer return to
/// zero within the horizon is dropped, which leaves every entry exact.
pub fn collision_lower_bounds(params: &AnnealedParams, horizon: usize) -> Vec<f64> {
    let kernel = difference_kernel(params.mode);
    let dim = kernel[0].0.len();
    let reach: i64 = kernel
        .iter()
        .map(|(v, _)| v.iter().map(|c| c.abs() as i64).sum::<i64>())
        .max()
        .unwrap_or(0);
    // alive mass has l1 <= min(reach*n, reach*(horizon-n) + reach) <= horizon + reach
    let radius = horizon as i64 + reach;
    let side = (2 * radius + 1) as usize;
    let total = side.pow(dim as u32);
    let strides: Vec<i64> = (0..dim).map(|i| side.pow((dim - 1 - i) as u32) as i64).collect();
    let offsets: Vec<(i64, f64)> = kernel
        .iter()
        .map(|(v, q)| (v.iter().zip(&strides).map(|(c, s)| *c as i64 * s).sum(), *q))
        .collect();
    let centre: i64 = strides.iter().map(|s| radius * s).sum();

    let mut cur = vec![0.0f64; total];
    let mut next = vec![0.0f64; total];
    cur[centre as usize] = 1.0;
    let mut met = 0.0;
    let mut out = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        // radius of the mass alive before this step
        let r_prev = (reach * (n as i64 - 1)).min(radius);
        for_each_in_box(dim, r_prev, |coord| {
            let idx = centre + coord.iter().zip(&strides).map(|(c, s)| c * s).sum::<i64>();
            let m = cur[idx as usize];
            if m != 0.0 {
                cur[idx as usize] = 0.0;
                for (off, q) in &offsets {
                    let j = idx + off;
                    if j == centre {
                        met += m * q;
                    } else {
                        next[j as usize] += m * q;
                    }
                }
            }
        });
        // drop mass too far away to return in time
        let keep = reach * (horizon - n) as i64;
        let r_now = (reach * n as i64).min(radius);
        if keep < r_now * dim as i64 {
            for_each_in_box(dim, r_now, |coord| {
                if coord.iter().map(|c| c.abs()).sum::<i64>() > keep {
                    let idx = centre + coord.iter().zip(&strides).map(|(c, s)| c * s).sum::<i64>();
                    next[idx as usize] = 0.0;
                }
            });
        }
        std::mem::swap(&mut cur, &mut next);
        out.push(met.min(1.0));
    }
    out
}

/// Visit every point of `[-r, r]^dim`, last axis fastest.
fn for_each_in_box(dim: usize, r: i64, mut f: impl FnMut(&[i64])) {
    let mut coord = vec![-r; dim];
    loop {
        f(&coord);
        let mut i = dim;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            coord[i] += 1;
            if coord[i] <= r {
                break;
            }
            coord[i] = -r;
        }
    }
}

const MC_CHUNK: u64 = 4096;

fn simulate_chunk(kernel: &[(Vec<i32>, f64)], cdf: &[f64], samples: u64, horizon: usize, seed: u64) -> u64 {
    let dim = kernel[0].0.len();
    let reach: i64 = kernel
        .iter()
        .map(|(v, _)| v.iter().map(|c| c.abs() as i64).sum::<i64>())
        .max()
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    let mut pos = vec![0i64; dim];
    for _ in 0..samples {
        pos.iter_mut().for_each(|c| *c = 0);
        for n in 1..=horizon {
            let u: f64 = rng.gen();
            let k = cdf.partition_point(|&c| c <= u).min(kernel.len() - 1);
            for (c, dc) in pos.iter_mut().zip(&kernel[k].0) {
                *c += *dc as i64;
            }
            let l1: i64 = pos.iter().map(|c| c.abs()).sum();
            if l1 == 0 {
                hits += 1;
                break;
            }
            if l1 > reach * (horizon - n) as i64 {
                break;
            }
        }
    }
    hits
}

/// Exact lower bound over `horizon` steps plus a Monte Carlo point estimate.
/// Monte Carlo work is split into fixed chunks, each with its own stream, so
/// the result does not depend on the thread count.
pub fn collision_rho(params: &AnnealedParams, opts: &RhoOptions) -> RhoEstimate {
    let lower_bound = if opts.horizon == 0 {
        0.0
    } else {
        *collision_lower_bounds(params, opts.horizon).last().unwrap()
    };
    let kernel = difference_kernel(params.mode);
    let mut acc = 0.0;
    let cdf: Vec<f64> = kernel
        .iter()
        .map(|(_, q)| {
            acc += q;
            acc
        })
        .collect();
    let chunks = opts.mc_samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = MC_CHUNK.min(opts.mc_samples - c * MC_CHUNK);
            simulate_chunk(&kernel, &cdf, size, opts.mc_horizon, derive_seed(opts.seed, c))
        })
        .sum();
    let n = opts.mc_samples.max(1) as f64;
    let point = hits as f64 / n;
    RhoEstimate {
        lower_bound,
        point_estimate: point,
        horizon: opts.horizon,
        mc_samples: opts.mc_samples,
        mc_horizon: opts.mc_horizon,
        mc_hits: hits,
        mc_stderr: (point * (1.0 - point) / n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_a_distribution() {
        for mode in [GraphMode::semi(1), GraphMode::semi(3), GraphMode::full(2)] {
            let k = difference_kernel(mode);
            let s: f64 = k.iter().map(|(_, q)| q).sum();
            assert!((s - 1.0).abs() < 1e-14);
            let zero = k.iter().find(|(v, _)| v.iter().all(|c| *c == 0)).unwrap().1;
            assert!((zero - 1.0 / mode.out_degree() as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_meeting() {
        for d in 1..=4 {
            let prm = AnnealedParams::semi(0.3, d).unwrap();
            let lb = collision_lower_bounds(&prm, 1);
            assert!((lb[0] - 1.0 / (2.0 * d as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_step_meeting_d1() {
        // diff steps -2,0,+2 w.p. 1/4,1/2,1/4: met by 2 = 1/2 + 1/2 * 1/4
        let prm = AnnealedParams::semi(0.3, 1).unwrap();
        let lb = collision_lower_bounds(&prm, 2);
        assert!((lb[1] - 0.625).abs() < 1e-14);
    }

    #[test]
    fn truncation_does_not_change_prefix() {
        let prm = AnnealedParams::semi(0.3, 2).unwrap();
        let short = collision_lower_bounds(&prm, 6);
        let long = collision_lower_bounds(&prm, 12);
        for (a, b) in short.iter().zip(&long) {
            assert!((a - b).abs() < 1e-14);
        }
        for w in long.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
