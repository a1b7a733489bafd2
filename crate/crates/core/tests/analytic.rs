use lpp_core::analytic::{
    binomial_tail, collision_lower_bounds, collision_rho, expected_n_ln, ln_phi, phi, phi_root,
    second_moment_sum, AnnealedParams, RhoOptions, RootStatus,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

/// `P{Bin(n, p) >= kmin}` in exact rational arithmetic, `p = num/den`.
fn exact_tail(n: u64, kmin: u64, num: i64, den: i64) -> f64 {
    let p = BigRational::new(BigInt::from(num), BigInt::from(den));
    let q = BigRational::from_integer(BigInt::from(1)) - &p;
    let mut total = BigRational::from_integer(BigInt::from(0));
    let mut binom = BigInt::from(1);
    for k in 0..=n {
        if k > 0 {
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        if k >= kmin {
            let mut term = BigRational::from_integer(binom.clone());
            for _ in 0..k {
                term *= &p;
            }
            for _ in 0..(n - k) {
                term *= &q;
            }
            total += term;
        }
    }
    total.to_f64().unwrap()
}

#[test]
fn tail_matches_exact_rationals() {
    for (num, den) in [(1, 10), (3, 10), (1, 2), (4, 5)] {
        let p = num as f64 / den as f64;
        for n in [1u64, 2, 7, 20, 33, 60] {
            for kmin in 0..=n {
                let want = exact_tail(n, kmin, num, den);
                let got = binomial_tail(n, kmin, p).exp();
                let rel = (got - want).abs() / want;
                assert!(rel < 1e-12, "n={n} kmin={kmin} p={p}: {got} vs {want}");
            }
        }
    }
    let want = exact_tail(50, 30, 2, 5);
    assert!((binomial_tail(50, 30, 0.4).exp() - want).abs() / want < 1e-12);
}

#[test]
fn tail_deep_underflow_stays_finite() {
    let l = binomial_tail(5000, 4900, 0.1);
    assert!(l.is_finite() && l < -5000.0);
}

#[test]
fn phi_root_against_grid() {
    let prm = AnnealedParams::semi(0.2, 1).unwrap();
    let root = phi_root(&prm);
    assert_eq!(root.status, RootStatus::Interior);
    let steps = 1_000_000;
    let h = 0.8 / steps as f64;
    let cross = (0..steps)
        .map(|i| 0.2 + i as f64 * h)
        .find(|&a| ln_phi(a, &prm) <= 0.0)
        .unwrap();
    assert!((root.alpha - cross).abs() <= 2.0 * h, "{} vs {cross}", root.alpha);
}

#[test]
fn expected_n_converges_to_phi() {
    for d in 1..=3 {
        for p in [0.1, 0.4] {
            let prm = AnnealedParams::semi(p, d).unwrap();
            for a in [p + 0.05, p + 0.2, 0.9] {
                let root = (expected_n_ln(4000, a, &prm) / 4000.0).exp();
                assert!((root - phi(a, &prm)).abs() <= 0.005 * phi(a, &prm));
            }
        }
    }
}

#[test]
fn second_moment_sum_against_direct_evaluation() {
    let prm = AnnealedParams::semi(0.3, 4).unwrap();
    let (n, alpha, beta, rho): (usize, f64, f64, f64) = (40, 0.4, 0.5, 0.2);
    let kn = 16u64;
    let denom = exact_tail(n as u64, kn, 3, 10);
    let mut want = 0.0;
    for k in 1..=20u64 {
        let num = exact_tail(n as u64 - k, kn.saturating_sub(k), 3, 10);
        want += rho.powi(k as i32) * num / denom;
    }
    let got = second_moment_sum(n, alpha, beta, rho, &prm).unwrap();
    assert!((got - want).abs() < 1e-10 * want.max(1.0));
}

#[test]
fn rho_recurrent_and_transient() {
    let one = collision_lower_bounds(&AnnealedParams::semi(0.3, 1).unwrap(), 2000);
    assert!(*one.last().unwrap() > 0.9);
    let est = collision_rho(
        &AnnealedParams::semi(0.3, 4).unwrap(),
        &RhoOptions {
            horizon: 8,
            mc_samples: 20_000,
            mc_horizon: 200,
            seed: 3,
        },
    );
    assert!(est.lower_bound <= est.point_estimate + 4.0 * est.mc_stderr);
    assert!(est.point_estimate < 0.5);
}

#[test]
fn rho_mc_independent_of_threads() {
    let prm = AnnealedParams::semi(0.3, 3).unwrap();
    let opts = RhoOptions {
        horizon: 4,
        mc_samples: 10_000,
        mc_horizon: 100,
        seed: 42,
    };
    let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| collision_rho(&prm, &opts));
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| collision_rho(&prm, &opts));
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn phi_bounds(p in 0.01f64..0.99, a in 0.0f64..1.0, d in 1usize..5) {
        let prm = AnnealedParams::semi(p, d).unwrap();
        let v = phi(a, &prm);
        prop_assert!(v <= 2.0 * d as f64 + 1e-12);
        // decreasing from 2d at p to 2dp at 1
        prop_assert!(v >= 2.0 * d as f64 * p - 1e-12);
    }

    #[test]
    fn tail_monotone_in_kmin(n in 1u64..200, p in 0.01f64..0.99) {
        let mut prev = 0.0;
        for k in 0..=n + 1 {
            let t = binomial_tail(n, k, p);
            prop_assert!(t <= prev + 1e-12);
            prev = t;
        }
    }
}
