use lpp_core::counting::{
    build_count_layers, build_max_layers, count_n, count_n_xy, final_count_layer, max_layers, max_weight,
    max_weight_path, oracle_table, run_counts, threshold, Backend, DpOptions, Geometry, DEFAULT_ORACLE_CAP,
};
use lpp_core::lattice::{path_weight, Environment, GraphMode, Vertex};
use lpp_core::LppError;
use proptest::prelude::*;

fn dp_matches_oracle(mode: GraphMode, seed: u64, p: f64, n_max: usize) {
    let env = Environment::new(seed, p, mode).unwrap();
    let start = Vertex::origin(mode.dim());
    let layers = build_count_layers(&env, n_max).unwrap();
    for (n, layer) in layers.iter().enumerate() {
        let oracle = oracle_table(&env, &start, n, DEFAULT_ORACLE_CAP).unwrap();
        for ((y, k), c) in &oracle.table {
            assert_eq!(layer.count(y, *k as usize).to_f64(), *c as f64, "n={n} y={y} k={k}");
        }
        let nonzero: usize = layer
            .entries()
            .iter()
            .map(|(_, col)| col.iter().filter(|c| !c.is_zero()).count())
            .sum();
        assert_eq!(nonzero, oracle.table.len());
        for alpha in [0.0, 0.25, 0.5, 0.8, 1.0] {
            let kmin = threshold(alpha, n) as u64;
            assert_eq!(count_n(layer, alpha).unwrap().to_f64(), oracle.at_least(kmin) as f64);
            for (y, _) in oracle.table.keys().take(4) {
                assert_eq!(count_n_xy(layer, alpha, y).unwrap().to_f64(), oracle.at_least_at(y, kmin) as f64);
            }
        }
        assert_eq!(max_weight(&env, n).unwrap(), oracle.max_weight);
    }
}

#[test]
fn oracle_equivalence_semi() {
    for seed in 0..20 {
        dp_matches_oracle(GraphMode::semi(1), seed, 0.5, 10);
        dp_matches_oracle(GraphMode::semi(2), seed, 0.3, 7);
    }
    dp_matches_oracle(GraphMode::semi(3), 5, 0.4, 5);
}

#[test]
fn oracle_equivalence_full() {
    for seed in 0..10 {
        dp_matches_oracle(GraphMode::full(1), seed, 0.5, 10);
        dp_matches_oracle(GraphMode::full(2), seed, 0.3, 7);
    }
}

#[test]
fn oracle_refuses_above_cap() {
    let env = Environment::new(1, 0.5, GraphMode::semi(2)).unwrap();
    let err = oracle_table(&env, &Vertex::origin(2), 20, 1000).unwrap_err();
    assert!(matches!(err, LppError::OracleCap { .. }));
    assert!(err.is_resource());
}

#[test]
fn trivial_counts() {
    let env = Environment::new(3, 0.5, GraphMode::semi(1)).unwrap();
    let l0 = final_count_layer(&env, 0, &DpOptions::default()).unwrap();
    assert_eq!(count_n(&l0, 0.0).unwrap().to_f64(), 1.0);
    let env2 = Environment::new(3, 0.5, GraphMode::semi(2)).unwrap();
    let l5 = final_count_layer(&env2, 5, &DpOptions::default()).unwrap();
    assert_eq!(count_n(&l5, 0.0).unwrap().to_f64(), 1024.0);
    let all = Environment::all_good(GraphMode::semi(2));
    let l = final_count_layer(&all, 6, &DpOptions::default()).unwrap();
    assert_eq!(count_n(&l, 1.0).unwrap().to_f64(), 4f64.powi(6));
    assert!(count_n(&l, 1.5).is_err());
}

#[test]
fn endpoint_bound() {
    for d in 1..=3usize {
        let mode = GraphMode::semi(d);
        let env = Environment::new(1, 0.5, mode).unwrap();
        let layers = build_count_layers(&env, 8).unwrap();
        for (t, layer) in layers.iter().enumerate() {
            let reached = layer.endpoints_reached(0);
            assert!(reached as u64 <= (t as u64 + 1).pow(d as u32));
            if d <= 2 {
                assert_eq!(reached as u64, (t as u64 + 1).pow(d as u32));
            }
            assert_eq!(reached as u64, Geometry::count_at(mode, t));
        }
    }
}

#[test]
fn backends_agree() {
    let env = Environment::new(8, 0.35, GraphMode::semi(2)).unwrap();
    let n = 70; // 4^70 needs the 256-bit storage
    let exact = final_count_layer(&env, n, &DpOptions::default()).unwrap();
    let big = final_count_layer(
        &env,
        n,
        &DpOptions {
            backend: Backend::Exact,
            ..DpOptions::default()
        },
    )
    .unwrap();
    let log = final_count_layer(
        &env,
        n,
        &DpOptions {
            backend: Backend::Log,
            ..DpOptions::default()
        },
    )
    .unwrap();
    for alpha in [0.0, 0.3, 0.45, 0.6] {
        let e = count_n(&exact, alpha).unwrap();
        assert_eq!(e, count_n(&big, alpha).unwrap());
        let l = count_n(&log, alpha).unwrap();
        if !e.is_zero() {
            assert!((e.ln() - l.ln()).abs() < 1e-11, "alpha={alpha}");
        }
    }
}

#[test]
fn resource_refusal() {
    let env = Environment::new(1, 0.5, GraphMode::semi(4)).unwrap();
    let opts = DpOptions {
        memory_budget: 1 << 20,
        ..DpOptions::default()
    };
    let err = final_count_layer(&env, 40, &opts).unwrap_err();
    assert!(err.is_resource(), "{err}");
}

#[test]
fn superadditivity_via_shifted_dp() {
    for seed in 0..20u64 {
        let env = Environment::new(seed, 0.3, GraphMode::semi(2)).unwrap();
        let (n, m) = (5 + seed as usize % 7, 3 + seed as usize % 5);
        let geom = Geometry::build(env.mode(), n + m);
        let origin = Vertex::origin(2);
        let first = max_layers(&env, &origin, n, &geom).unwrap();
        let mid = first[n].argmax_endpoint_lex();
        let second = max_layers(&env, &mid, m, &geom).unwrap();
        let total = max_weight(&env, n + m).unwrap();
        assert!(total >= first[n].max() + second[m].max(), "seed {seed}");
    }
}

#[test]
fn max_path_attains_max() {
    for seed in 0..10u64 {
        let mode = if seed % 2 == 0 { GraphMode::semi(2) } else { GraphMode::full(2) };
        let env = Environment::new(seed, 0.4, mode).unwrap();
        let geom = Geometry::build(mode, 25);
        let path = max_weight_path(&env, &Vertex::origin(2), 25, &geom).unwrap();
        path.validate(mode).unwrap();
        assert_eq!(path_weight(&path, &env).unwrap(), max_weight(&env, 25).unwrap());
        let layers = build_max_layers(&env, 25).unwrap();
        assert_eq!(path.endpoint(mode), layers[25].argmax_endpoint_lex());
    }
}

#[test]
fn direction_changes_on_random_path() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
    let steps = GraphMode::semi(2).steps();
    let path = lpp_core::lattice::PathRecord::new(
        Vertex::origin(2),
        (0..20).map(|_| steps[rng.gen_range(0..4)]).collect(),
    );
    let dc = path.direction_changes();
    let brute: Vec<usize> = (0..19).filter(|&k| path.steps[k] != path.steps[k + 1]).collect();
    assert_eq!(dc.positions, brute);
    assert_eq!(dc.count, brute.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_monotone_in_alpha(seed in any::<u64>(), n in 0usize..25, d in 1usize..=2) {
        let env = Environment::new(seed, 0.45, GraphMode::semi(d)).unwrap();
        let layer = final_count_layer(&env, n, &DpOptions::default()).unwrap();
        let mut prev = count_n(&layer, 0.0).unwrap();
        for i in 1..=20 {
            let c = count_n(&layer, i as f64 / 20.0).unwrap();
            prop_assert!(c.to_f64() <= prev.to_f64());
            prev = c;
        }
        prop_assert!(count_n(&layer, 0.0).unwrap().to_f64() == ((2 * d) as f64).powi(n as i32));
    }

    #[test]
    fn counts_monotone_in_environment(seed in any::<u64>(), n in 1usize..20, a in 0.0f64..1.0) {
        // raising p only turns bad vertices good
        let lo = Environment::new(seed, 0.2, GraphMode::semi(1)).unwrap();
        let hi = lo.with_p(0.5).unwrap();
        let cl = count_n(&final_count_layer(&lo, n, &DpOptions::default()).unwrap(), a).unwrap();
        let ch = count_n(&final_count_layer(&hi, n, &DpOptions::default()).unwrap(), a).unwrap();
        prop_assert!(cl.to_f64() <= ch.to_f64());
        prop_assert!(max_weight(&lo, n).unwrap() <= max_weight(&hi, n).unwrap());
    }

    #[test]
    fn capped_matches_uncapped(seed in any::<u64>(), n in 1usize..30, cap in 0usize..30) {
        let env = Environment::new(seed, 0.5, GraphMode::semi(2)).unwrap();
        let full = final_count_layer(&env, n, &DpOptions::default()).unwrap();
        let capped = final_count_layer(&env, n, &DpOptions { k_cap: Some(cap), ..DpOptions::default() }).unwrap();
        for k in 0..=cap.min(n) {
            prop_assert_eq!(full.at_least(k).unwrap(), capped.at_least(k).unwrap());
        }
    }

    #[test]
    fn conservation(seed in any::<u64>(), n in 0usize..40, d in 1usize..=3) {
        let env = Environment::new(seed, 0.3, GraphMode::semi(d)).unwrap();
        let geom = Geometry::build(env.mode(), n);
        let opts = DpOptions { backend: Backend::Exact, keep_history: false, ..DpOptions::default() };
        run_counts(&env, &Vertex::origin(d), n, &opts, &geom, |l| {
            let want = num_bigint::BigUint::from(2 * d as u64).pow(l.level() as u32);
            assert_eq!(l.total().exact(), Some(&want));
            Ok(())
        }).unwrap();
    }
}
