use lpp_core::analytic::{expected_n_ln, AnnealedParams};
use lpp_core::counting::{oracle_table, DEFAULT_ORACLE_CAP};
use lpp_core::estimators::{
    estimate_lambda, estimate_m, fit_power_law, lambda_above_one_probe, prob_n_zero, probe_path,
    second_moment_ratio, straight_path, ExperimentConfig, Fixture,
};
use lpp_core::lattice::{Environment, GraphMode, Vertex};

fn cfg(p: f64, d: usize, n: Vec<usize>, alpha: Vec<f64>, reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(AnnealedParams::semi(p, d).unwrap(), n, alpha, reps, seed)
}

#[test]
fn all_good_fixture() {
    let c = cfg(0.3, 1, vec![10, 30], vec![0.5], 5, 0).with_fixture(Fixture::AllGood);
    let r = estimate_m(&c).unwrap();
    for n in [10, 30] {
        let s = r.aggregate(n, None, "max_density").unwrap().summary;
        assert_eq!((s.mean, s.stdev), (1.0, 0.0));
    }
    let sm = second_moment_ratio(&c).unwrap();
    assert_eq!(sm.row(30, 0.5).unwrap().ratio, Some(1.0));
}

#[test]
fn max_dominates_straight_path() {
    let r = estimate_m(&cfg(0.3, 2, vec![5, 20, 40], vec![0.0], 30, 1)).unwrap();
    for n in [5, 20, 40] {
        let m = r.values(n, None, "max_density");
        let s = r.values(n, None, "straight_density");
        assert!(m.iter().zip(&s).all(|(a, b)| a.unwrap() >= b.unwrap()));
    }
}

#[test]
fn m_means_monotone_in_p() {
    let mut prev = 0.0;
    for p in [0.05, 0.1, 0.2, 0.4, 0.7] {
        let m = estimate_m(&cfg(p, 1, vec![60], vec![0.0], 40, 2))
            .unwrap()
            .aggregate(60, None, "max_density")
            .unwrap()
            .summary
            .mean;
        assert!(m >= prev, "p={p}");
        prev = m;
    }
}

#[test]
fn m_consistent_with_oracle_at_small_n() {
    // E max_n / n is nondecreasing along doubling (superadditivity), so the
    // long-path mean must dominate the enumerated short-path mean.
    let n0 = 12;
    let reps = 200;
    let mut short = 0.0;
    for r in 0..reps {
        let env = Environment::new(lpp_core::lattice::derive_seed(99, r), 0.5, GraphMode::semi(1)).unwrap();
        short += oracle_table(&env, &Vertex::origin(1), n0, DEFAULT_ORACLE_CAP).unwrap().max_weight as f64 / n0 as f64;
    }
    short /= reps as f64;
    let r = estimate_m(&cfg(0.5, 1, vec![12, 400], vec![0.0], 200, 99)).unwrap();
    let s12 = r.aggregate(12, None, "max_density").unwrap().summary;
    assert!((s12.mean - short).abs() < 1e-12);
    let s400 = r.aggregate(400, None, "max_density").unwrap().summary;
    assert!(s400.ci_high >= short && s400.mean <= 1.0);
}

#[test]
fn lambda_alpha_zero_is_out_degree() {
    let r = estimate_lambda(&cfg(0.4, 2, vec![15], vec![0.0], 10, 3)).unwrap();
    for v in r.values(15, Some(0.0), "root") {
        assert!((v.unwrap() - 4.0).abs() < 1e-12);
    }
    assert_eq!(r.zero_fraction, Some(0.0));
}

#[test]
fn lambda_alpha_one_mostly_zero() {
    let r = estimate_lambda(&cfg(0.5, 1, vec![50], vec![1.0], 100, 4)).unwrap();
    let a = r.aggregate(50, Some(1.0), "root").unwrap();
    assert!(a.summary.mean < 1.0);
    assert!(r.zero_fraction.unwrap() > 0.9);
}

#[test]
fn lambda_rejects_alpha_above_one() {
    assert!(estimate_lambda(&cfg(0.5, 1, vec![5], vec![1.2], 3, 0)).is_err());
}

#[test]
fn per_rep_invariants() {
    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let r = estimate_lambda(&cfg(0.4, 2, vec![8, 16], alphas.clone(), 30, 5)).unwrap();
    for rec in &r.per_rep {
        for n in [8, 16] {
            let counts: Vec<f64> = alphas
                .iter()
                .map(|a| rec.observations.iter().find(|o| o.n == n && o.alpha == Some(*a) && o.statistic == "count").unwrap().value.unwrap())
                .collect();
            assert!(counts.windows(2).all(|w| w[1] <= w[0]));
            for o in rec.observations.iter().filter(|o| o.statistic == "root") {
                assert!(o.value.unwrap() <= 4.0 + 1e-12);
            }
        }
    }
    for a in &r.aggregates {
        assert!((a.summary.ci_high - a.summary.mean - 1.96 * a.summary.stderr).abs() < 1e-9 * a.summary.mean.abs().max(1.0));
        if let Some(z) = a.zero_fraction {
            assert!((0.0..=1.0).contains(&z));
        }
    }
}

#[test]
fn mean_count_matches_annealed_mean() {
    for (d, n, alphas) in [(1usize, 20usize, vec![0.4, 0.6]), (2, 12, vec![0.35, 0.5])] {
        let c = cfg(0.3, d, vec![n], alphas.clone(), 10_000, 17);
        let r = estimate_lambda(&c).unwrap();
        for a in alphas {
            let s = r.aggregate(n, Some(a), "count").unwrap().summary;
            let want = expected_n_ln(n, a, &c.params).exp();
            assert!((s.mean - want).abs() <= 3.0 * s.stderr, "d={d} a={a}: {} vs {want}", s.mean);
        }
    }
}

#[test]
fn markov_consistency() {
    let c = cfg(0.3, 1, vec![20], vec![0.5], 4000, 21);
    let r = estimate_lambda(&c).unwrap();
    let mean = expected_n_ln(20, 0.5, &c.params).exp();
    let counts = r.values(20, Some(0.5), "count");
    for k in [10.0, 100.0] {
        let frac = counts.iter().filter(|v| v.unwrap() > k * mean).count() as f64 / counts.len() as f64;
        let slack = 3.0 * (1.0 / k / counts.len() as f64).sqrt();
        assert!(frac <= 1.0 / k + slack, "K={k}: {frac}");
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let c = cfg(0.3, 2, vec![6, 12], vec![0.3, 0.5], 24, 77);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_lambda(&c).unwrap().without_timing())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn json_and_csv_shape() {
    let r = estimate_lambda(&cfg(0.3, 1, vec![10], vec![0.5], 5, 1)).unwrap();
    let json = r.to_json().unwrap();
    for key in ["\"config\"", "\"perRep\"", "\"aggregates\"", "\"zeroFraction\"", "\"wallClock\"", "\"codeVersion\""] {
        assert!(json.contains(key), "{key}");
    }
    let back: lpp_core::estimators::ExperimentResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back.per_rep, r.per_rep);
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("n,alpha,statistic,"));
    assert_eq!(text.lines().count(), 1 + r.aggregates.len());
}

#[test]
fn zero_probability_trivial_cases() {
    let r = prob_n_zero(&cfg(0.5, 1, vec![5, 10, 20], vec![0.0, 1.5], 50, 6)).unwrap();
    assert!(r.curves[0].rows.iter().all(|row| row.frequency == 0.0));
    assert!(r.curves[1].rows.iter().all(|row| row.frequency == 1.0));
}

#[test]
fn zero_probability_decays_where_measurable() {
    let r = prob_n_zero(&cfg(0.5, 1, vec![20, 40, 80, 160], vec![0.84], 500, 7)).unwrap();
    let c = &r.curves[0];
    assert!(c.precondition_met);
    assert!(c.strictly_decreasing, "{:?}", c.rows);
    assert!(c.fit.as_ref().unwrap().slope < 0.0);
}

#[test]
fn power_law_fit_identity() {
    let pts: Vec<(f64, f64)> = [0.01, 0.03, 0.1, 0.2].iter().map(|&p: &f64| (p, 3.0 * p.powf(0.5))).collect();
    let f = fit_power_law(&pts).unwrap();
    assert!((f.slope - 0.5).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(fit_power_law(&pts[..1]).is_err());
}

#[test]
fn probe_straight_path_is_degenerate() {
    let env = Environment::new(4, 0.3, GraphMode::semi(2)).unwrap();
    let path = straight_path(&env, 20);
    let r = probe_path(&env, &path, 0.3, u64::MAX).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.interchange.family_size, 1.0);
    assert!(r.bound_holds);
}

#[test]
fn probe_bound_and_growth() {
    let p = 0.3;
    let m = estimate_m(&cfg(p, 2, vec![100], vec![0.0], 30, 31))
        .unwrap()
        .aggregate(100, None, "max_density")
        .unwrap()
        .summary
        .mean;
    let alpha = 0.5 * (p + m);
    let r = lambda_above_one_probe(&cfg(p, 2, vec![100], vec![alpha], 100, 32)).unwrap();
    assert!(r.all_bounds_hold);
    assert!(r.fraction_root_above_one >= 0.95, "{}", r.fraction_root_above_one);
}
