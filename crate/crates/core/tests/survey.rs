use hemisel::estimators::Method;
use hemisel::frame::SurveyFrame;
use hemisel::selection::{simulate_threshold, OutcomeModel, Propensity, ScalarLaw, ThresholdModelSpec};
use hemisel::survey::{
    bootstrap_variance, confidence_interval, gini_pairwise_oracle, gini_with_variance, jackknife_variance,
    multiple_impute, normal_draw, weighted_gini, ImputeConfig, ParameterUncertainty, VarianceConfig, VarianceMethod,
};
use hemisel::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn phi_inv(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random::<f64>()).collect()
}

fn income_frame(copula: f64, n: usize, seed: u64) -> SurveyFrame {
    let spec = ThresholdModelSpec {
        propensity: Propensity::NormalCdf { intercept: 0.5, slopes: vec![1.5] },
        copula_rho: copula,
        outcome: OutcomeModel::LogNormal { beta: vec![0.0], sigma: 0.6 },
        z_laws: vec![ScalarLaw::standard_normal()],
        x_laws: vec![],
    };
    simulate_threshold(&spec, n, seed).unwrap().to_frame(false)
}

fn quick(method: Method, replicates: usize) -> ImputeConfig {
    ImputeConfig {
        method,
        replicates,
        grid_points: 128,
        variance: VarianceConfig { method: VarianceMethod::Bootstrap, replicates: 50 },
        ..Default::default()
    }
}

#[test]
fn gini_examples() {
    let eq = [1.0f64; 3];
    assert_eq!(weighted_gini(&[1.0, 1.0, 1.0], &eq).unwrap(), 0.0);
    assert!((weighted_gini(&[1.0, 2.0, 3.0], &eq).unwrap() - 2.0 / 9.0).abs() < 1e-15);
    assert!((weighted_gini::<f64>(&[0.0, 1.0], &[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    assert!((gini_pairwise_oracle(&[1.0, 2.0, 3.0], &eq).unwrap() - 2.0 / 9.0).abs() < 1e-15);
    assert_eq!(gini_pairwise_oracle(&[4.0], &[2.0]).unwrap(), 0.0);
    let split = gini_pairwise_oracle::<f64>(&[1.0, 2.0, 3.0, 3.0], &[1.0, 1.0, 0.5, 0.5]).unwrap();
    assert!((split - 2.0 / 9.0).abs() < 1e-15);
}

#[test]
fn gini_errors() {
    assert!(matches!(weighted_gini(&[1.0, -1.0], &[1.0, 1.0]), Err(Error::Domain(_))));
    assert!(weighted_gini(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    assert!(weighted_gini(&[1.0], &[1.0, 2.0]).is_err());
    assert!(weighted_gini::<f64>(&[], &[]).is_err());
    assert!(gini_pairwise_oracle(&[1.0, -1.0], &[1.0, 1.0]).is_err());
}

#[test]
fn gini_matches_pairwise_oracle_with_ties() {
    let mut r = rng(3);
    for _ in 0..300 {
        let n = r.random_range(1..40);
        let y: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..6u8)) * 0.5).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * r.random::<f64>()).collect();
        if y.iter().all(|&v| v == 0.0) {
            continue;
        }
        let a = weighted_gini(&y, &w).unwrap();
        let b = gini_pairwise_oracle(&y, &w).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn gini_of_the_uniform_law() {
    let y = uniform(100_000, 5);
    let g = weighted_gini(&y, &vec![1.0; y.len()]).unwrap();
    assert!((g - 1.0 / 3.0).abs() < 0.01, "{g}");
}

#[test]
fn gini_is_generic() {
    let g = weighted_gini::<f32>(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
    assert!((g - 2.0 / 9.0).abs() < 1e-6);
}

#[test]
fn bootstrap_of_a_constant_is_zero() {
    let y = vec![2.5; 200];
    assert_eq!(bootstrap_variance(&y, &vec![1.0; 200], 100, 1).unwrap(), 0.0);
    assert_eq!(jackknife_variance(&y, &vec![1.0; 200]).unwrap(), 0.0);
    assert!(matches!(bootstrap_variance(&y, &vec![1.0; 200], 49, 1), Err(Error::Precondition(_))));
}

#[test]
fn bootstrap_tracks_the_sampling_variance() {
    let n = 2000;
    let ones = vec![1.0; n];
    let outer: Vec<f64> = (0..200).map(|k| weighted_gini(&uniform(n, 1000 + k), &ones).unwrap()).collect();
    let m = outer.iter().sum::<f64>() / outer.len() as f64;
    let truth = outer.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (outer.len() - 1) as f64;
    let est = bootstrap_variance(&uniform(n, 7), &ones, 500, 11).unwrap();
    assert!(est > truth / 2.0 && est < truth * 2.0, "bootstrap {est}, Monte Carlo {truth}");
    let jk = jackknife_variance(&uniform(n, 7), &ones).unwrap();
    assert!(jk > truth / 2.0 && jk < truth * 2.0, "jackknife {jk}, Monte Carlo {truth}");
}

#[test]
fn bootstrap_variance_shrinks_with_n() {
    let small = bootstrap_variance(&uniform(500, 8), &vec![1.0; 500], 300, 2).unwrap();
    let large = bootstrap_variance(&uniform(2000, 8), &vec![1.0; 2000], 300, 2).unwrap();
    assert!(large < small, "{large} >= {small}");
}

#[test]
fn variance_config_dispatch() {
    let y = uniform(300, 9);
    let w = vec![3.0; 300];
    let boot = gini_with_variance(&y, &w, &VarianceConfig::default(), 4).unwrap();
    assert_eq!(boot.method, VarianceMethod::Bootstrap);
    assert_eq!(boot.estimate, weighted_gini(&y, &w).unwrap());
    let jk = gini_with_variance(&y, &w, &VarianceConfig { method: VarianceMethod::Jackknife, replicates: 0 }, 4).unwrap();
    assert_eq!(jk.variance, jackknife_variance(&y, &w).unwrap());
}

#[test]
fn normal_draw_examples() {
    assert_eq!(normal_draw(0.3, 0.0, 5).unwrap(), 0.3);
    assert!(normal_draw(0.3, -1.0, 5).is_err());
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|s| normal_draw(1.0, 4.0, s).unwrap()).collect();
    let m = draws.iter().sum::<f64>() / n as f64;
    let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((m - 1.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
    assert!((v / 4.0 - 1.0).abs() < 0.05);
}

#[test]
fn confidence_interval_examples() {
    assert_eq!(confidence_interval(&[0.7; 25], 0.1).unwrap(), (0.7, 0.7));
    let n = 100_001;
    let z: Vec<f64> = (0..n).map(|k| phi_inv((k as f64 + 0.5) / n as f64)).collect();
    let (lo, hi) = confidence_interval(&z, 0.1).unwrap();
    assert!((lo - phi_inv(0.05)).abs() < 1e-4 && (hi - phi_inv(0.95)).abs() < 1e-4, "({lo}, {hi})");
    let v: Vec<f64> = (0..30).map(|k| (k as f64 * 1.7).sin()).collect();
    let (mn, mx) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert_eq!(confidence_interval(&v, 0.0).unwrap(), (mn, mx));
    assert!(matches!(confidence_interval(&v[..19], 0.1), Err(Error::InsufficientData(_))));
    assert!(confidence_interval(&v, 1.0).is_err());
}

#[test]
fn multiple_imputation_is_deterministic() {
    let frame = income_frame(0.5, 1_500, 1);
    let cfg = ImputeConfig { seed: 99, ..quick(Method::Threshold, 20) };
    let a = multiple_impute(&frame, &cfg).unwrap();
    let b = multiple_impute(&frame, &cfg).unwrap();
    assert_eq!(a.completed_estimates, b.completed_estimates);
    assert_eq!(a.interval, b.interval);
    assert_eq!(a.seeds, b.seeds);
    let c = multiple_impute(&frame, &ImputeConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.completed_estimates, c.completed_estimates);
}

#[test]
fn report_invariants() {
    let frame = income_frame(0.8, 1_500, 2);
    for pu in [ParameterUncertainty::Bootstrap, ParameterUncertainty::Ignore] {
        let cfg = ImputeConfig { parameter_uncertainty: pu, ..quick(Method::Threshold, 30) };
        let rep = multiple_impute(&frame, &cfg).unwrap();
        assert_eq!(rep.completed_estimates.len(), 30);
        assert_eq!(rep.seeds.len(), 30);
        let (lo, hi) = rep.interval;
        assert!(lo <= rep.median() && rep.median() <= hi);
        assert!((rep.level - 0.9).abs() < 1e-15);
        assert!(!rep.degenerate);
        assert!(rep.completed_estimates.iter().all(|g| g.is_finite()));
        assert_eq!(rep.csv_line().split(',').count(), hemisel::survey::ImputationReport::CSV_HEADER.split(',').count());
    }
}

#[test]
fn zero_nonresponse_is_the_normal_interval() {
    let frame = income_frame(0.0, 800, 3);
    let keep: Vec<usize> = (0..frame.len()).filter(|&i| frame.r[i] == 1).collect();
    let full = frame.select(&keep);
    let cfg = quick(Method::Threshold, 2_000);
    let rep = multiple_impute(&full, &cfg).unwrap();
    assert!(rep.degenerate);
    assert!(!rep.warnings.is_empty());
    // Every replicate is the naive estimate plus independent normal noise.
    let (lo, hi) = rep.interval;
    let (nlo, nhi) = rep.naive_interval();
    let sd = rep.naive.variance.sqrt();
    assert!((lo - nlo).abs() < 0.1 * sd && (hi - nhi).abs() < 0.1 * sd, "({lo}, {hi}) vs ({nlo}, {nhi})");
}

#[test]
fn single_replicate_interval_is_a_point() {
    let frame = income_frame(0.3, 1_000, 4);
    let rep = multiple_impute(&frame, &quick(Method::Threshold, 1)).unwrap();
    assert_eq!(rep.replicates.len(), 1);
    assert_eq!(rep.interval, (rep.replicates[0], rep.replicates[0]));
    assert!(!rep.warnings.is_empty());
}

#[test]
fn interval_endpoints_are_replicate_quantiles() {
    let frame = income_frame(0.3, 1_000, 5);
    let rep = multiple_impute(&frame, &quick(Method::Mar, 41)).unwrap();
    let mut g = rep.replicates.clone();
    g.sort_by(f64::total_cmp);
    // Type-7 quantiles at 5% and 95% of 41 values: ranks 2 and 38 (0-based).
    assert_eq!(rep.interval, (g[2], g[38]));
}

#[test]
fn imputations_stay_inside_the_grid() {
    let frame = income_frame(0.8, 1_200, 6);
    let rep = multiple_impute(&frame, &quick(Method::Threshold, 5)).unwrap();
    let (lo, hi) = rep.t_range.unwrap();
    assert!(lo >= 0.0 && lo < hi);
    let y = frame.observed_y();
    let ymax = y.iter().copied().fold(f64::MIN, f64::max);
    assert!(hi >= ymax);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gini_equals_oracle(data in prop::collection::vec((0u8..8, 1.0f64..20.0), 1..60)) {
        let y: Vec<f64> = data.iter().map(|d| f64::from(d.0) * 1.25).collect();
        let w: Vec<f64> = data.iter().map(|d| d.1).collect();
        prop_assume!(y.iter().any(|&v| v > 0.0));
        let a = weighted_gini(&y, &w).unwrap();
        let b = gini_pairwise_oracle(&y, &w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn gini_scale_invariance(y in prop::collection::vec(0.0f64..100.0, 2..50), k in 0i32..6) {
        prop_assume!(y.iter().any(|&v| v > 0.0));
        let w = vec![1.0; y.len()];
        // Powers of two scale every partial sum exactly.
        let c = 2f64.powi(k - 2);
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        prop_assert_eq!(weighted_gini(&y, &w).unwrap(), weighted_gini(&scaled, &w).unwrap());
    }

    #[test]
    fn duplicated_record_with_halved_weights(y in prop::collection::vec(0.1f64..10.0, 1..30), pick in 0usize..30) {
        let w: Vec<f64> = (0..y.len()).map(|i| 1.0 + i as f64).collect();
        let i = pick % y.len();
        let (mut y2, mut w2) = (y.clone(), w.clone());
        w2[i] /= 2.0;
        y2.push(y[i]);
        w2.push(w[i] / 2.0);
        let a = gini_pairwise_oracle(&y, &w).unwrap();
        let b = gini_pairwise_oracle(&y2, &w2).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((weighted_gini(&y2, &w2).unwrap() - a).abs() < 1e-12);
    }
}
