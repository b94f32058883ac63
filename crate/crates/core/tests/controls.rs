use condstick_core::samplers::{sample_beta_pair, sample_stable, CondSampler, RngState};
use condstick_core::verify::oracles::{beta_cdf, inverse_gaussian_cdf};
use condstick_core::verify::{
    ks_one_sample, moment_check, par_draws, run_suite, sigmas_for_level, SuiteConfig, TestReport,
};
use condstick_core::{Alpha, Error};

const N: usize = 20_000;

#[test]
fn beta_sample_matches_incomplete_beta() {
    let a = 0.3;
    let xs = par_draws(&RngState::new(1, 0), N, |r| {
        Ok(sample_beta_pair(1.0 - a, a, r).0)
    })
    .unwrap();
    assert!(
        ks_one_sample(&xs, |t| beta_cdf(1.0 - a, a, t), 0.001)
            .unwrap()
            .passed
    );
}

#[test]
fn misspecified_rate_is_rejected() {
    let s = CondSampler::new(Alpha::HALF, 1).unwrap();
    let xs = par_draws(&RngState::new(2, 0), N, |r| Ok(s.tilted_stable(1.0, r))).unwrap();
    assert!(
        ks_one_sample(&xs, |t| inverse_gaussian_cdf(t, 1.0), 0.001)
            .unwrap()
            .passed
    );
    assert!(
        !ks_one_sample(&xs, |t| inverse_gaussian_cdf(t, 1.5), 0.001)
            .unwrap()
            .passed
    );
}

#[test]
fn wrong_laplace_target_is_rejected() {
    let a = Alpha::new(0.7).unwrap();
    let xs = par_draws(
        &RngState::new(3, 0),
        N,
        |r| Ok((-sample_stable(a, r)).exp()),
    )
    .unwrap();
    let z = sigmas_for_level(0.001);
    assert!(moment_check(&xs, (-1f64).exp(), z).unwrap().passed);
    assert!(!moment_check(&xs, (-1.05f64).exp(), z).unwrap().passed);
}

fn small(alphas: &[f64]) -> SuiteConfig {
    SuiteConfig {
        draws: 5_000,
        identity_draws: 5_000,
        alphas: Some(alphas.to_vec()),
        ..SuiteConfig::default()
    }
}

fn assert_all_pass(reports: &[TestReport]) {
    assert!(!reports.is_empty());
    for r in reports {
        assert!(r.passed, "{}", r.to_json_line());
        assert!(r.seed.is_some());
    }
}

#[test]
fn stirling_suite_passes_on_default_grid() {
    let cfg = SuiteConfig {
        draws: 5_000,
        ..SuiteConfig::default()
    };
    assert_all_pass(&run_suite("stirling", &cfg, &RngState::new(11, 0)).unwrap());
}

#[test]
fn gem_suite_passes_for_a_small_grid() {
    let cfg = SuiteConfig {
        thetas: Some(vec![0.5]),
        ms: Some(vec![0, 1, 2]),
        ..small(&[0.5])
    };
    assert_all_pass(&run_suite("gem", &cfg, &RngState::new(7, 0)).unwrap());
}

#[test]
fn every_suite_runs_at_small_scale() {
    let cfg = SuiteConfig {
        lambdas: Some(vec![1.0]),
        ..small(&[0.5])
    };
    for name in condstick_core::verify::SUITE_NAMES {
        let reports = run_suite(name, &cfg, &RngState::new(5, 0)).unwrap();
        assert!(!reports.is_empty(), "{name}");
        assert!(reports.iter().all(|r| r.suite.starts_with(name)));
        assert!(reports.iter().all(|r| r.statistic.is_finite()), "{name}");
    }
}

#[test]
fn unknown_suite_is_rejected() {
    let err = run_suite("nope", &SuiteConfig::default(), &RngState::new(0, 0)).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
}
