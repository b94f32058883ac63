//! Named acceptance bundles.
//!
//! A suite is a list of cases. Each case owns the child stream of the suite
//! state at its index, so the reports do not depend on scheduling, and each
//! report carries the seed that replays its case.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::oracles::{
    beta_cdf, crp_block_pmf, first_half_stick_cdf, gig_half_ln_pdf, inverse_gaussian_cdf,
    laplace_derivative, stirling_exact_f64, w_conditional_cdf,
};
use super::{
    chi_square_groups, chi_square_pmf, correlation, correlation_check, ks_one_sample,
    ks_two_sample, moment_check, par_draws, sigmas_for_level, TestReport, DEFAULT_LEVEL,
};
use crate::error::{Error, Result};
use crate::quad::QuadConfig;
use crate::samplers::{
    sample_crp_block_count, sample_gamma, sample_gem_lambda, sample_stable, CondSampler, RngState,
};
use crate::specfun::density::{total_mass, LnPdfFn};
use crate::specfun::kernel::{n_conditional_pmf, Kernel};
use crate::specfun::{
    stable_pdf, CdfTable, CondStableDensity, Density, GemLambdaDensity, R1mDensity, StableDensity,
    Support, WConditionalDensity, YDensity,
};
use crate::stickbreak::{LawSpec, Pipeline, StickDraw, StickSampler};
use crate::Alpha;

pub const SUITE_NAMES: [&str; 8] = [
    "normalization",
    "stirling",
    "moments",
    "transfer",
    "gem",
    "binomial",
    "half",
    "pipelines",
];

/// Parameters of a suite run. `None` grids fall back to each suite's own
/// default grid.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub draws: usize,
    /// Draws for the per-draw exact identities.
    pub identity_draws: usize,
    pub level: f64,
    /// Divide `level` by the number of level-based tests in the suite.
    pub bonferroni: bool,
    pub alphas: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub ms: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub quad: QuadConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            draws: 100_000,
            identity_draws: 1_000_000,
            level: DEFAULT_LEVEL,
            bonferroni: false,
            alphas: None,
            thetas: None,
            ms: None,
            lambdas: None,
            quad: QuadConfig::default(),
        }
    }
}

impl SuiteConfig {
    fn alphas(&self, default: &[f64]) -> Result<Vec<Alpha>> {
        self.alphas
            .as_deref()
            .unwrap_or(default)
            .iter()
            .map(|&a| Alpha::new(a))
            .collect()
    }

    fn lambdas(&self, default: &[f64]) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| default.to_vec())
    }

    fn ms(&self, default: &[usize]) -> Vec<usize> {
        self.ms.clone().unwrap_or_else(|| default.to_vec())
    }

    /// `(α, θ)` pairs: the cartesian product when either list is given.
    fn gem_pairs(&self) -> Result<Vec<(Alpha, f64)>> {
        if self.alphas.is_none() && self.thetas.is_none() {
            return Ok(vec![
                (Alpha::new(0.5)?, 0.5),
                (Alpha::new(0.3)?, 1.0),
                (Alpha::new(0.7)?, -0.2),
            ]);
        }
        let alphas = self.alphas(&[0.5])?;
        let thetas = self.thetas.clone().unwrap_or_else(|| vec![0.5]);
        Ok(alphas
            .iter()
            .flat_map(|&a| thetas.iter().map(move |&t| (a, t)))
            .collect())
    }
}

type CaseFn = Box<dyn Fn(f64, &RngState) -> Result<Vec<TestReport>> + Send + Sync>;

struct Case {
    name: String,
    /// Number of level-based tests the case reports.
    tests: usize,
    run: CaseFn,
}

fn case<F>(name: impl Into<String>, tests: usize, run: F) -> Case
where
    F: Fn(f64, &RngState) -> Result<Vec<TestReport>> + Send + Sync + 'static,
{
    Case {
        name: name.into(),
        tests,
        run: Box::new(run),
    }
}

/// Runs suite `name` and returns one report per check.
pub fn run_suite(name: &str, cfg: &SuiteConfig, rng: &RngState) -> Result<Vec<TestReport>> {
    let cases = match name {
        "normalization" => normalization(cfg)?,
        "stirling" => stirling(cfg)?,
        "moments" => moments(cfg)?,
        "transfer" => transfer(cfg)?,
        "gem" => gem(cfg)?,
        "binomial" => binomial(cfg)?,
        "half" => half(cfg)?,
        "pipelines" => pipelines(cfg)?,
        other => {
            return Err(Error::Usage(format!(
                "unknown suite '{other}', expected one of {}",
                SUITE_NAMES.join(", ")
            )))
        }
    };
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Usage(format!(
            "level must lie in (0, 1), got {}",
            cfg.level
        )));
    }
    let n_tests: usize = cases.iter().map(|c| c.tests).sum();
    let level = if cfg.bonferroni && n_tests > 0 {
        cfg.level / n_tests as f64
    } else {
        cfg.level
    };
    let out: Vec<Vec<TestReport>> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let child = rng.child(i as u64);
            let seed = child.snapshot();
            let label = format!("{name}/{}", c.name);
            match (c.run)(level, &child) {
                Ok(reports) => reports
                    .into_iter()
                    .map(|r| {
                        let full = if r.suite.is_empty() {
                            label.clone()
                        } else {
                            format!("{label}/{}", r.suite)
                        };
                        let r = r.named(full);
                        if r.seed.is_none() {
                            r.with_seed(seed)
                        } else {
                            r
                        }
                    })
                    .collect(),
                Err(e) => vec![TestReport {
                    suite: label,
                    statistic: f64::NAN,
                    threshold: f64::NAN,
                    p_value: None,
                    draws: 0,
                    seed: Some(seed),
                    passed: false,
                    detail: format!("error: {e}"),
                }],
            }
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

fn sub(r: TestReport, name: impl Into<String>) -> TestReport {
    r.named(name)
}

fn unnamed(r: TestReport) -> TestReport {
    r.named("")
}

/// Draws `n` values in two halves from disjoint child streams.
fn two_samples<F, G>(rng: &RngState, n: usize, f: F, g: G) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut RngState) -> Result<f64> + Sync,
    G: Fn(&mut RngState) -> Result<f64> + Sync,
{
    let a = par_draws(&rng.child(0), n, f)?;
    let b = par_draws(&rng.child(1), n, g)?;
    Ok((a, b))
}

fn mass_error<D: Density>(d: &D, quad: &QuadConfig) -> Result<f64> {
    Ok((total_mass(d, quad)?.mass - 1.0).abs())
}

struct Worst {
    err: f64,
    at: String,
    checked: usize,
}

impl Worst {
    fn new() -> Self {
        Worst {
            err: 0.0,
            at: String::new(),
            checked: 0,
        }
    }

    fn see(&mut self, err: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        if !(err <= self.err) {
            self.err = err;
            self.at = at();
        }
    }

    fn report(self, tol: f64) -> TestReport {
        let detail = format!("worst at {} over {} checks", self.at, self.checked);
        TestReport::deterministic("", self.err, tol, detail)
    }
}

// ---------------------------------------------------------------- stirling

fn stirling(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let alphas = cfg.alphas(&[0.1, 0.3, 0.5, 0.7, 0.9])?;
    let max_m = cfg
        .ms
        .as_ref()
        .and_then(|v| v.iter().max().copied())
        .unwrap_or(24)
        .max(1);
    let lambdas = cfg.lambdas(&[0.5, 1.0, 2.0]);
    let draws = cfg.draws;
    let mut cases = Vec::new();
    for &alpha in &alphas {
        let a = alpha.get();
        cases.push(case(format!("exact-sum/alpha={a}"), 0, move |_, _| {
            let kernel = Kernel::new(alpha, max_m)?;
            let mut w = Worst::new();
            for m in 1..=max_m {
                for k in 1..=m {
                    let exact = stirling_exact_f64(m, k, a);
                    let err = (kernel.ln_stirling(m, k)?.exp() / exact - 1.0).abs();
                    w.see(err, || format!("m={m} k={k}"));
                }
            }
            Ok(vec![w.report(1e-10)])
        }));
        let lambdas = lambdas.clone();
        cases.push(case(format!("derivative/alpha={a}"), 0, move |_, _| {
            let kernel = Kernel::new(alpha, 6)?;
            let mut w = Worst::new();
            for m in 0..=6 {
                for &l in &lambdas {
                    let err =
                        (kernel.tilted_moment(m, l)? / laplace_derivative(m, l, a) - 1.0).abs();
                    w.see(err, || format!("m={m} lambda={l}"));
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        cases.push(case(format!("crp-recursion/alpha={a}"), 0, move |_, _| {
            let kernel = Kernel::new(alpha, max_m)?;
            let mut w = Worst::new();
            for m in 1..=max_m {
                let pmf = kernel.pd_block_pmf(m)?;
                for (k, p) in crp_block_pmf(m, a, 0.0).iter().enumerate() {
                    w.see((pmf.prob(k + 1) - p).abs(), || format!("m={m} k={}", k + 1));
                }
            }
            Ok(vec![w.report(1e-12)])
        }));
        cases.push(case(
            format!("crp-frequencies/alpha={a}/m=6"),
            1,
            move |level, rng| {
                let ks = par_draws(rng, draws, |r| sample_crp_block_count(6, alpha, 0.0, r))?;
                let pmf = Kernel::new(alpha, 6)?.pd_block_pmf(6)?;
                Ok(vec![unnamed(chi_square_pmf(&tally(&ks, 6), &pmf, level)?)])
            },
        ));
        cases.push(case(
            format!("conditional-blocks/alpha={a}/m=5/lambda=2"),
            1,
            move |level, rng| {
                let s = CondSampler::new(alpha, 5)?;
                let ks = par_draws(rng, draws, |r| s.block_count(5, 2.0, r))?;
                let pmf = s.kernel().block_pmf_conditional(5, 2.0)?;
                Ok(vec![unnamed(chi_square_pmf(&tally(&ks, 5), &pmf, level)?)])
            },
        ));
    }
    Ok(cases)
}

fn tally(ks: &[usize], m: usize) -> Vec<u64> {
    let mut c = vec![0u64; m];
    for &k in ks {
        c[k - 1] += 1;
    }
    c
}

// ----------------------------------------------------------- normalization

fn normalization(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let alphas = cfg.alphas(&[0.3, 0.5, 0.7])?;
    let ms = cfg.ms(&[0, 1, 2, 5]);
    let lambdas = cfg.lambdas(&[0.5, 1.0, 2.0]);
    let quad = cfg.quad;
    let rs = [0.2, 0.5, 0.8];
    let mut cases = Vec::new();
    for &alpha in &alphas {
        let a = alpha.get();
        cases.push(case(format!("stable/alpha={a}"), 0, move |_, _| {
            let err = mass_error(&StableDensity::new(alpha), &quad)?;
            Ok(vec![TestReport::deterministic(
                "",
                err,
                1e-6,
                "stable density mass",
            )])
        }));
        let (ms_c, ls_c) = (ms.clone(), lambdas.clone());
        cases.push(case(format!("cond-stable/alpha={a}"), 0, move |_, _| {
            let mut w = Worst::new();
            for &m in &ms_c {
                for &l in &ls_c {
                    for rho in [m as f64, m as f64 - 0.5] {
                        let d = CondStableDensity::new(alpha, l, rho)?;
                        w.see(mass_error(&d, &quad)?, || format!("rho={rho} lambda={l}"));
                    }
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        let (ms_c, ls_c) = (ms.clone(), lambdas.clone());
        cases.push(case(format!("y/alpha={a}"), 0, move |_, _| {
            let mut w = Worst::new();
            for &m in ms_c.iter().filter(|&&m| m >= 1) {
                for k in 1..=m {
                    for &l in &ls_c {
                        let d = YDensity::new(alpha, l, m, k)?;
                        w.see(mass_error(&d, &quad)?, || format!("m={m} k={k} lambda={l}"));
                    }
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        let (ms_c, ls_c) = (ms.clone(), lambdas.clone());
        cases.push(case(format!("r1m/alpha={a}"), 0, move |_, _| {
            let mut w = Worst::new();
            for &m in ms_c.iter().filter(|&&m| m >= 1) {
                for k in 1..=m {
                    for &l in &ls_c {
                        let d = R1mDensity::new(alpha, l, m, k)?;
                        w.see(mass_error(&d, &quad)?, || format!("m={m} k={k} lambda={l}"));
                    }
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        let ms_c = ms.clone();
        cases.push(case(format!("w-conditional/alpha={a}"), 0, move |_, _| {
            let mut w = Worst::new();
            for &m in ms_c.iter().filter(|&&m| m >= 1) {
                for &r in &rs {
                    let d = WConditionalDensity::new(alpha, r, m)?;
                    w.see(mass_error(&d, &quad)?, || format!("m={m} r={r}"));
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        let ms_c = ms.clone();
        let thetas = cfg.thetas.clone();
        cases.push(case(format!("gem-lambda/alpha={a}"), 0, move |_, _| {
            let mut w = Worst::new();
            let thetas = thetas.clone().unwrap_or_else(|| vec![0.5, -0.5 * a]);
            for &m in &ms_c {
                for &theta in &thetas {
                    if theta <= -a || (m == 0 && theta <= 0.0) {
                        continue;
                    }
                    let d = GemLambdaDensity::new(alpha, theta, m)?;
                    w.see(mass_error(&d, &quad)?, || format!("m={m} theta={theta}"));
                }
            }
            Ok(vec![w.report(1e-6)])
        }));
        let (ms_c, ls_c) = (ms.clone(), lambdas.clone());
        cases.push(case(format!("pmf/alpha={a}"), 0, move |_, _| {
            let top = ms_c.iter().copied().max().unwrap_or(1).max(1);
            let kernel = Kernel::new(alpha, top)?;
            let mut w = Worst::new();
            for &m in ms_c.iter().filter(|&&m| m >= 1) {
                w.see((kernel.pd_block_pmf(m)?.total() - 1.0).abs(), || {
                    format!("blocks m={m}")
                });
                for &l in &ls_c {
                    let t = kernel.block_pmf_conditional(m, l)?.total();
                    w.see((t - 1.0).abs(), || format!("blocks-cond m={m} lambda={l}"));
                    let t = kernel.n_marginal_pmf(m, l)?.total();
                    w.see((t - 1.0).abs(), || format!("n-marginal m={m} lambda={l}"));
                    // the unnormalized terms sum to one on their own
                    let raw: f64 = kernel
                        .ln_n_marginal_terms(m, l)?
                        .iter()
                        .map(|v| v.exp())
                        .sum();
                    w.see((raw - 1.0).abs(), || {
                        format!("n-marginal raw m={m} lambda={l}")
                    });
                }
                for &r in &rs {
                    let t = n_conditional_pmf(m, r, alpha)?.total();
                    w.see((t - 1.0).abs(), || format!("n-cond m={m} r={r}"));
                }
            }
            Ok(vec![w.report(1e-12)])
        }));
    }
    Ok(cases)
}

// ----------------------------------------------------------------- moments

fn moments(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let alphas = cfg.alphas(&[0.3, 0.5, 0.7])?;
    let lambdas = cfg.lambdas(&[0.5, 1.0, 2.0, 25.0]);
    let draws = cfg.draws;
    let quad = cfg.quad;
    let mut cases = Vec::new();
    for &alpha in &alphas {
        let a = alpha.get();
        cases.push(case(
            format!("stable-laplace/alpha={a}"),
            1,
            move |level, rng| {
                let xs = par_draws(rng, draws, |r| Ok((-sample_stable(alpha, r)).exp()))?;
                Ok(vec![unnamed(moment_check(
                    &xs,
                    (-1f64).exp(),
                    sigmas_for_level(level),
                )?)])
            },
        ));
        for &l in &lambdas {
            cases.push(case(
                format!("tilted-laplace/alpha={a}/lambda={l}"),
                3,
                move |level, rng| {
                    let s = CondSampler::new(alpha, 1)?;
                    let xs = par_draws(rng, draws, |r| Ok(s.tilted_stable(l, r)))?;
                    let mut out = Vec::new();
                    for sv in [0.5, 1.0, 2.0] {
                        let ys: Vec<f64> = xs.iter().map(|x| (-sv * x).exp()).collect();
                        let target = (l.powf(a) - (l + sv).powf(a)).exp();
                        out.push(sub(
                            moment_check(&ys, target, sigmas_for_level(level))?,
                            format!("s={sv}"),
                        ));
                    }
                    Ok(out)
                },
            ));
        }
        cases.push(case(
            format!("size-biased-moment/alpha={a}/lambda=1"),
            2,
            move |level, rng| {
                let kernel = Kernel::new(alpha, 2)?;
                let xs = par_draws(rng, draws, |r| Ok(sample_stable(alpha, r)))?;
                let mut out = Vec::new();
                for m in [1i32, 2] {
                    let ys: Vec<f64> = xs.iter().map(|x| x.powi(m) * (-x).exp()).collect();
                    let target = kernel.tilted_moment(m as usize, 1.0)?;
                    out.push(sub(
                        moment_check(&ys, target, sigmas_for_level(level))?,
                        format!("m={m}"),
                    ));
                }
                Ok(out)
            },
        ));
        cases.push(case(
            format!("stable-density/alpha={a}"),
            1,
            move |level, rng| {
                let table = CdfTable::build(&StableDensity::new(alpha), &quad)?;
                let xs = par_draws(rng, draws, |r| Ok(sample_stable(alpha, r)))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
        cases.push(case(
            format!("gem-lambda-mean/alpha={a}/theta=alpha/m=0"),
            1,
            move |level, rng| {
                let xs = par_draws(rng, draws, |r| {
                    Ok(sample_gem_lambda(0, a, alpha, r)?.powf(a))
                })?;
                Ok(vec![unnamed(moment_check(
                    &xs,
                    1.0,
                    sigmas_for_level(level),
                )?)])
            },
        ));
    }
    let half = Alpha::HALF;
    cases.push(case(
        "block-count/alpha=0.5/m=2/lambda=1",
        1,
        move |level, rng| {
            let s = CondSampler::new(half, 2)?;
            let xs = par_draws(rng, draws, |r| {
                Ok((s.block_count(2, 1.0, r)? == 1) as u8 as f64)
            })?;
            Ok(vec![unnamed(moment_check(
                &xs,
                0.5,
                sigmas_for_level(level),
            )?)])
        },
    ));
    cases.push(case("crp-two/alpha=0.5/theta=0.5", 1, move |level, rng| {
        let xs = par_draws(rng, draws, |r| {
            Ok((sample_crp_block_count(2, half, 0.5, r)? == 2) as u8 as f64)
        })?;
        Ok(vec![unnamed(moment_check(
            &xs,
            2.0 / 3.0,
            sigmas_for_level(level),
        )?)])
    }));
    Ok(cases)
}

// ---------------------------------------------------------------- transfer

fn transfer(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let alphas = cfg.alphas(&[0.3, 0.5, 0.7])?;
    let ms = cfg.ms(&[2, 3]);
    let lambdas = cfg.lambdas(&[0.5, 2.0]);
    let draws = cfg.draws;
    let quad = cfg.quad;
    let mut cases = Vec::new();
    for &alpha in &alphas {
        let a = alpha.get();
        for &m in ms.iter().filter(|&&m| m >= 1) {
            for k in [1usize, 2].into_iter().filter(|&k| k <= m) {
                for &l in &lambdas {
                    cases.push(case(
                        format!("identity/alpha={a}/m={m}/k={k}/lambda={l}"),
                        1,
                        move |level, rng| {
                            let s = CondSampler::new(alpha, m)?;
                            let (x, y) = two_samples(
                                rng,
                                draws,
                                |r| s.cond_stable(m - k, l, r),
                                |r| {
                                    let yv = s.y(m, m - k, l, r)?;
                                    s.cond_stable(m, l + yv, r)
                                },
                            )?;
                            Ok(vec![unnamed(ks_two_sample(&x, &y, level)?)])
                        },
                    ));
                }
            }
        }
    }
    let half = Alpha::HALF;
    for m in [0usize, 2] {
        cases.push(case(
            format!("cond-stable-density/alpha=0.5/m={m}/lambda=1"),
            1,
            move |level, rng| {
                let table = CdfTable::build(&CondStableDensity::new(half, 1.0, m as f64)?, &quad)?;
                let s = CondSampler::new(half, m)?;
                let xs = par_draws(rng, draws, |r| s.cond_stable(m, 1.0, r))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
    }
    for (a, m, ell, x) in [
        (0.5, 2usize, 1usize, 1.0),
        (0.3, 3, 1, 2.0),
        (0.7, 3, 0, 0.5),
    ] {
        let alpha = Alpha::new(a)?;
        cases.push(case(
            format!("y-density/alpha={a}/m={m}/ell={ell}/x={x}"),
            1,
            move |level, rng| {
                let table = CdfTable::build(&YDensity::new(alpha, x, m, m - ell)?, &quad)?;
                let s = CondSampler::new(alpha, m)?;
                let xs = par_draws(rng, draws, |r| Ok(s.y(m, ell, x, r)? / x))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
    }
    cases.push(case(
        "r1m-density/alpha=0.5/m=2/k=1/lambda=1",
        1,
        move |level, rng| {
            let table = CdfTable::build(&R1mDensity::new(half, 1.0, 2, 1)?, &quad)?;
            let s = CondSampler::new(half, 2)?;
            let xs = par_draws(rng, draws, |r| {
                let y = s.y(2, 1, 1.0, r)?;
                Ok(1.0 / (1.0 + y))
            })?;
            Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
        },
    ));
    Ok(cases)
}

// --------------------------------------------------------------------- gem

const GEM_STICKS: usize = 5;

fn draw_sticks(
    rng: &RngState,
    n_draws: usize,
    s: &StickSampler,
    n: usize,
) -> Result<Vec<StickDraw>> {
    par_draws(rng, n_draws, |r| s.draw(n, r))
}

fn column<F: Fn(&StickDraw) -> f64>(draws: &[StickDraw], f: F) -> Vec<f64> {
    draws.iter().map(f).collect()
}

/// KS of `1 - W_k` against `Beta(1-α, θ + kα)` for `k = 1..=n`, and the
/// pairwise correlation bound.
fn gem_stick_reports(
    draws: &[StickDraw],
    a: f64,
    theta: f64,
    n: usize,
    level: f64,
) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for k in 0..n {
        let v = column(draws, |d| d.one_minus_w[k]);
        let b = theta + (k + 1) as f64 * a;
        let r = ks_one_sample(&v, |x| beta_cdf(1.0 - a, b, x), level)?;
        out.push(sub(r, format!("W{}", k + 1)));
    }
    for j in 0..n {
        for k in j + 1..n {
            let x = column(draws, |d| d.w[j]);
            let y = column(draws, |d| d.w[k]);
            out.push(sub(
                correlation_check(&x, &y)?,
                format!("corr-W{}-W{}", j + 1, k + 1),
            ));
        }
    }
    Ok(out)
}

fn gem(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let pairs = cfg.gem_pairs()?;
    let ms = cfg.ms(&[0, 1, 2, 4]);
    let draws = cfg.draws;
    let quad = cfg.quad;
    let mut cases = Vec::new();
    for &(alpha, theta) in &pairs {
        let a = alpha.get();
        if theta <= -a {
            return Err(Error::Usage(format!(
                "theta = {theta} is not above -alpha = {}",
                -a
            )));
        }
        for &m in &ms {
            if m == 0 && theta <= 0.0 {
                continue;
            }
            cases.push(case(
                format!("sticks/alpha={a}/theta={theta}/m={m}"),
                GEM_STICKS,
                move |level, rng| {
                    let s = StickSampler::new(LawSpec::gem(alpha, theta, m)?, Pipeline::Gem)?;
                    let d = draw_sticks(rng, draws, &s, GEM_STICKS)?;
                    gem_stick_reports(&d, a, theta, GEM_STICKS, level)
                },
            ));
        }
        if theta > 0.0 {
            cases.push(case(
                format!("cross-path/alpha={a}/theta={theta}/m=0-vs-2"),
                2,
                move |level, rng| {
                    let s0 = StickSampler::new(LawSpec::gem(alpha, theta, 0)?, Pipeline::Gem)?;
                    let s2 = StickSampler::new(LawSpec::gem(alpha, theta, 2)?, Pipeline::Gem)?;
                    let d0 = draw_sticks(&rng.child(0), draws, &s0, 2)?;
                    let d2 = draw_sticks(&rng.child(1), draws, &s2, 2)?;
                    let mut out = Vec::new();
                    for k in 0..2 {
                        let r = ks_two_sample(
                            &column(&d0, |d| d.w[k]),
                            &column(&d2, |d| d.w[k]),
                            level,
                        )?;
                        out.push(sub(r, format!("W{}", k + 1)));
                    }
                    Ok(out)
                },
            ));
        }
        cases.push(case(
            format!("lambda-density/alpha={a}/theta={theta}/m=2"),
            1,
            move |level, rng| {
                let table = CdfTable::build(&GemLambdaDensity::new(alpha, theta, 2)?, &quad)?;
                let xs = par_draws(rng, draws, |r| sample_gem_lambda(2, theta, alpha, r))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
    }
    if cfg.alphas.is_none() && cfg.thetas.is_none() {
        let half = Alpha::HALF;
        cases.push(case(
            "lambda-density/alpha=0.5/theta=0/m=2",
            1,
            move |level, rng| {
                let table = CdfTable::build(&GemLambdaDensity::new(half, 0.0, 2)?, &quad)?;
                let xs = par_draws(rng, draws, |r| sample_gem_lambda(2, 0.0, half, r))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
    }
    Ok(cases)
}

// ---------------------------------------------------------------- binomial

fn binomial_pmf(n: usize, j: usize, p: f64, q: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..j {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(j as i32) * q.powi((n - j) as i32)
}

fn binomial(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let pairs = cfg.gem_pairs()?;
    let ms = cfg.ms(&[4]);
    let draws = cfg.draws;
    let mut cases = Vec::new();
    for &(alpha, theta) in &pairs {
        let a = alpha.get();
        for &m in ms.iter().filter(|&&m| m >= 2) {
            cases.push(case(
                format!("n-given-w/alpha={a}/theta={theta}/m={m}"),
                1,
                move |level, rng| {
                    let s = StickSampler::new(LawSpec::gem(alpha, theta, m)?, Pipeline::Gem)?;
                    let d = draw_sticks(rng, draws, &s, 1)?;
                    let mut pts: Vec<(f64, f64, usize)> = d
                        .iter()
                        .map(|x| (x.w[0], x.one_minus_w[0], x.n[0]))
                        .collect();
                    pts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                    let bins = 10;
                    let mut groups = Vec::new();
                    for b in 0..bins {
                        let lo = b * pts.len() / bins;
                        let hi = (b + 1) * pts.len() / bins;
                        let mut obs = vec![0.0; m];
                        let mut exp = vec![0.0; m];
                        for &(w, v, n) in &pts[lo..hi] {
                            obs[n - 1] += 1.0;
                            for (j, e) in exp.iter_mut().enumerate() {
                                *e += binomial_pmf(m - 1, j, v, w);
                            }
                        }
                        groups.push((obs, exp));
                    }
                    let r = chi_square_groups(&groups, level)?;
                    Ok(vec![
                        unnamed(r).with_detail(format!("W1 deciles; {}", r_detail(&groups)))
                    ])
                },
            ));
        }
    }
    Ok(cases)
}

fn r_detail(groups: &[(Vec<f64>, Vec<f64>)]) -> String {
    let n: f64 = groups.iter().map(|g| g.0.iter().sum::<f64>()).sum();
    format!("{} bins, {} draws", groups.len(), n)
}

// -------------------------------------------------------------------- half

fn half(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let lambdas = cfg.lambdas(&[0.5, 1.0, 2.0, 25.0, 100.0]);
    let draws = cfg.draws;
    let quad = cfg.quad;
    let half = Alpha::HALF;
    let mut cases = Vec::new();
    cases.push(case("closed-form", 0, move |_, _| {
        let mut w = Worst::new();
        let n = 2000;
        for i in 0..=n {
            let t = 0.05 + (20.0 - 0.05) * i as f64 / n as f64;
            let exact = t.powf(-1.5) * (-0.25 / t).exp() / (2.0 * PI.sqrt());
            w.see((stable_pdf(t, half)? / exact - 1.0).abs(), || {
                format!("t={t}")
            });
        }
        Ok(vec![w.report(1e-10)])
    }));
    for &l in &lambdas {
        cases.push(case(
            format!("inverse-gaussian/lambda={l}"),
            1,
            move |level, rng| {
                let s = CondSampler::new(half, 1)?;
                let xs = par_draws(rng, draws, |r| Ok(s.tilted_stable(l, r)))?;
                Ok(vec![unnamed(ks_one_sample(
                    &xs,
                    |t| inverse_gaussian_cdf(t, l),
                    level,
                )?)])
            },
        ));
    }
    for (m, l) in [(1usize, 1.0), (3, 1.0), (3, 25.0)] {
        cases.push(case(
            format!("gig/m={m}/lambda={l}"),
            1,
            move |level, rng| {
                let d = LnPdfFn::new(Support::Positive, move |t: f64, _, _| {
                    gig_half_ln_pdf(t, l, m)
                });
                let table = CdfTable::build(&d, &quad)?;
                let s = CondSampler::new(half, m)?;
                let xs = par_draws(rng, draws, |r| s.cond_stable(m, l, r))?;
                Ok(vec![unnamed(ks_one_sample(&xs, |t| table.cdf(t), level)?)])
            },
        ));
    }
    cases.push(case("stable-vs-gamma", 1, move |level, rng| {
        let (x, y) = two_samples(
            rng,
            draws,
            |r| Ok(sample_stable(half, r)),
            |r| Ok(0.25 / sample_gamma(0.5, r)),
        )?;
        Ok(vec![unnamed(ks_two_sample(&x, &y, level)?)])
    }));
    for m in [0usize, 2] {
        cases.push(case(
            format!("first-stick-given-s/m={m}/lambda=1"),
            1,
            move |level, rng| {
                let s = StickSampler::new(LawSpec::fixed(half, m, 1.0)?, Pipeline::Half)?;
                let d = draw_sticks(rng, draws, &s, 1)?;
                let u: Vec<f64> = d
                    .iter()
                    .map(|x| first_half_stick_cdf(x.ptilde[0], x.s2.expect("half path sets s2")))
                    .collect();
                Ok(vec![unnamed(ks_one_sample(
                    &u,
                    |t| t.clamp(0.0, 1.0),
                    level,
                )?)])
            },
        ));
    }
    let theta = 0.5;
    for m in [0usize, 2] {
        cases.push(case(
            format!("gem/theta={theta}/m={m}"),
            GEM_STICKS,
            move |level, rng| {
                let s = StickSampler::new(LawSpec::gem(half, theta, m)?, Pipeline::Half)?;
                let d = draw_sticks(rng, draws, &s, GEM_STICKS)?;
                gem_stick_reports(&d, 0.5, theta, GEM_STICKS, level)
            },
        ));
    }
    Ok(cases)
}

// --------------------------------------------------------------- pipelines

/// `F(W | R)` under the conditional stick law, for each draw at position `j`.
fn stick_pit(
    draws: &[StickDraw],
    j: usize,
    m: usize,
    alpha: Alpha,
    quad: &QuadConfig,
) -> Result<Vec<f64>> {
    draws
        .par_iter()
        .map(|d| w_conditional_cdf(d.w[j], d.r[j], m, alpha, quad))
        .collect()
}

fn pipelines(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let alphas = cfg.alphas(&[0.3, 0.5, 0.7])?;
    let lambdas = cfg.lambdas(&[0.5, 1.0, 2.0]);
    let draws = cfg.draws;
    let identity_draws = cfg.identity_draws;
    let quad = cfg.quad;
    let half = Alpha::HALF;
    let mut cases = Vec::new();
    for &alpha in &alphas {
        let a = alpha.get();
        for &l in &lambdas {
            cases.push(case(
                format!("general-vs-m1/alpha={a}/lambda={l}"),
                2,
                move |level, rng| {
                    let g = StickSampler::new(LawSpec::fixed(alpha, 1, l)?, Pipeline::General)?;
                    let s1 = StickSampler::new(LawSpec::fixed(alpha, 1, l)?, Pipeline::M1)?;
                    let dg = draw_sticks(&rng.child(0), draws, &g, 1)?;
                    let d1 = draw_sticks(&rng.child(1), draws, &s1, 1)?;
                    Ok(vec![
                        sub(
                            ks_two_sample(
                                &column(&dg, |d| d.w[0]),
                                &column(&d1, |d| d.w[0]),
                                level,
                            )?,
                            "W1",
                        ),
                        sub(
                            ks_two_sample(
                                &column(&dg, |d| d.ptilde[0]),
                                &column(&d1, |d| d.ptilde[0]),
                                level,
                            )?,
                            "P1",
                        ),
                    ])
                },
            ));
        }
        for m in [1usize, 3] {
            cases.push(case(
                format!("size-biased-pick/alpha={a}/m={m}/lambda=1"),
                2,
                move |level, rng| {
                    let s = StickSampler::new(LawSpec::fixed(alpha, m, 1.0)?, Pipeline::General)?;
                    let d = draw_sticks(rng, draws, &s, 1)?;
                    let kernel = Kernel::new(alpha, m)?;
                    let dens = LnPdfFn::new(
                        Support::Interval { lo: 0.0, hi: 1.0 },
                        move |r: f64, _, _| {
                            kernel
                                .ln_r_marginal_pdf(r, 1.0, m)
                                .unwrap_or(f64::NEG_INFINITY)
                        },
                    );
                    let table = CdfTable::build(&dens, &quad)?;
                    let rs = column(&d, |x| x.r[0]);
                    let u = stick_pit(&d, 0, m, alpha, &quad)?;
                    Ok(vec![
                        sub(ks_one_sample(&rs, |t| table.cdf(t), level)?, "R1"),
                        sub(ks_one_sample(&u, |t| t, level)?, "W1-given-R1"),
                    ])
                },
            ));
        }
    }
    for &l in &lambdas {
        cases.push(case(
            format!("half-vs-m0/lambda={l}"),
            2,
            move |level, rng| {
                let h = StickSampler::new(LawSpec::fixed(half, 0, l)?, Pipeline::Half)?;
                let s0 = StickSampler::new(LawSpec::fixed(half, 0, l)?, Pipeline::M0)?;
                let dh = draw_sticks(&rng.child(0), draws, &h, 1)?;
                let d0 = draw_sticks(&rng.child(1), draws, &s0, 1)?;
                Ok(vec![
                    sub(
                        ks_two_sample(&column(&dh, |d| d.w[0]), &column(&d0, |d| d.w[0]), level)?,
                        "W1",
                    ),
                    sub(
                        ks_two_sample(
                            &column(&dh, |d| d.ptilde[0]),
                            &column(&d0, |d| d.ptilde[0]),
                            level,
                        )?,
                        "P1",
                    ),
                ])
            },
        ));
    }
    cases.push(case(
        "n1-frequency/alpha=0.5/m=2/lambda=1",
        1,
        move |level, rng| {
            let s = StickSampler::new(LawSpec::fixed(half, 2, 1.0)?, Pipeline::General)?;
            let d = draw_sticks(rng, draws, &s, 1)?;
            let xs = column(&d, |x| (x.n[0] == 1) as u8 as f64);
            Ok(vec![unnamed(moment_check(
                &xs,
                0.5,
                sigmas_for_level(level),
            )?)])
        },
    ));
    cases.push(case(
        "conditional-independence/alpha=0.5/m=3/lambda=1",
        1,
        move |level, rng| {
            let s = StickSampler::new(LawSpec::fixed(half, 3, 1.0)?, Pipeline::General)?;
            let d = draw_sticks(rng, draws, &s, 2)?;
            let u1 = stick_pit(&d, 0, 3, half, &quad)?;
            let u2 = stick_pit(&d, 1, 3, half, &quad)?;
            let mut out = vec![
                sub(ks_one_sample(&u2, |t| t, level)?, "W2-given-R2"),
                sub(correlation_check(&u1, &u2)?, "pit-corr"),
            ];
            out.push(sub(binned_correlation(&d, 5)?, "binned-corr"));
            Ok(out)
        },
    ));
    let id_laws: Vec<(String, LawSpec, Pipeline)> = vec![
        (
            "m0/alpha=0.5/lambda=1".into(),
            LawSpec::fixed(half, 0, 1.0)?,
            Pipeline::M0,
        ),
        (
            "m1/alpha=0.5/lambda=1".into(),
            LawSpec::fixed(half, 1, 1.0)?,
            Pipeline::M1,
        ),
        (
            "general/alpha=0.5/m=3/lambda=1".into(),
            LawSpec::fixed(half, 3, 1.0)?,
            Pipeline::General,
        ),
        (
            "gem/alpha=0.3/theta=1/m=4".into(),
            LawSpec::gem(Alpha::new(0.3)?, 1.0, 4)?,
            Pipeline::Gem,
        ),
        (
            "gem/alpha=0.7/theta=-0.2/m=1".into(),
            LawSpec::gem(Alpha::new(0.7)?, -0.2, 1)?,
            Pipeline::Gem,
        ),
        (
            "gem/alpha=0.9/theta=0.5/m=0".into(),
            LawSpec::gem(Alpha::new(0.9)?, 0.5, 0)?,
            Pipeline::Gem,
        ),
        (
            "half/m=2/lambda=1".into(),
            LawSpec::fixed(half, 2, 1.0)?,
            Pipeline::Half,
        ),
    ];
    for (name, law, p) in id_laws {
        cases.push(case(format!("identities/{name}"), 0, move |_, rng| {
            let s = StickSampler::new(law, p)?;
            identity_report(&s, identity_draws, rng)
        }));
    }
    Ok(cases)
}

/// Largest `|ρ̂(W1, W2)| √n_bin / 4` over a grid of `(R1, R2)` quantile cells.
fn binned_correlation(d: &[StickDraw], per_axis: usize) -> Result<TestReport> {
    let rank = |f: &dyn Fn(&StickDraw) -> f64| {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&i, &j| f(&d[i]).partial_cmp(&f(&d[j])).unwrap());
        let mut cell = vec![0usize; d.len()];
        for (pos, &i) in idx.iter().enumerate() {
            cell[i] = pos * per_axis / d.len();
        }
        cell
    };
    let c1 = rank(&|x| x.r[0]);
    let c2 = rank(&|x| x.r[1]);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for b1 in 0..per_axis {
        for b2 in 0..per_axis {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for i in 0..d.len() {
                if c1[i] == b1 && c2[i] == b2 {
                    x.push(d[i].w[0]);
                    y.push(d[i].w[1]);
                }
            }
            if x.len() < 30 {
                continue;
            }
            let score = correlation(&x, &y).abs() * (x.len() as f64).sqrt() / 4.0;
            if score > worst {
                worst = score;
                detail = format!("cell ({b1},{b2}) with {} draws", x.len());
            }
        }
    }
    Ok(TestReport {
        suite: String::new(),
        statistic: worst,
        threshold: 1.0,
        p_value: None,
        draws: d.len() as u64,
        seed: None,
        passed: worst < 1.0,
        detail: format!("max |rho| sqrt(n)/4 at {detail}"),
    })
}

const IDENTITY_STICKS: usize = 8;

/// Counts per-draw violations of the exact identities.
fn identity_report(s: &StickSampler, n: usize, rng: &RngState) -> Result<Vec<TestReport>> {
    let alpha = s.law().alpha.get();
    let m = s.law().m;
    let general = s.pipeline() == Pipeline::General || (s.pipeline() == Pipeline::Gem && m >= 2);
    let has_r = s.pipeline() != Pipeline::Half;
    let stats = (0..n)
        .into_par_iter()
        .map(|i| -> Result<[f64; 5]> {
            let d = s.draw(IDENTITY_STICKS, &mut rng.child(i as u64))?;
            let mass = (d.ptilde.iter().sum::<f64>() + d.remainder - 1.0).abs();
            let mut order = 0.0;
            for k in 0..d.len() {
                let ok = d.one_minus_w[k] > 0.0 && (!has_r || d.w_minus_r[k] > 0.0);
                if !ok {
                    order += 1.0;
                }
            }
            let mut gtilde: f64 = 0.0;
            if !d.gtilde.is_empty() && d.lambda_path[0] > 0.0 {
                let ln_x = alpha * d.lambda_path[0].ln();
                let x = ln_x.exp();
                let (mut ln_prod, mut scale) = (0.0, ln_x.abs());
                for k in 0..d.len() {
                    let t = alpha * d.r[k].ln();
                    ln_prod += t;
                    scale += t.abs();
                    let rhs = (d.gtilde[k] + x).ln();
                    let err =
                        (ln_x - ln_prod - rhs).abs() / (f64::EPSILON * (scale + rhs.abs() + 1.0));
                    gtilde = gtilde.max(err);
                }
            }
            let mut path: f64 = 0.0;
            if general {
                for j in 1..d.lambda_path.len() {
                    let back = d.lambda_path[j] * d.r[j - 1];
                    path = path.max((back / d.lambda_path[j - 1] - 1.0).abs());
                }
            }
            let finite = d.w.iter().chain(&d.ptilde).all(|v| v.is_finite()) as u8 as f64;
            Ok([mass, order, gtilde, path, 1.0 - finite])
        })
        .try_fold(
            || [0.0f64; 5],
            |acc, x| {
                let x = x?;
                Ok([
                    acc[0].max(x[0]),
                    acc[1] + x[1],
                    acc[2].max(x[2]),
                    acc[3].max(x[3]),
                    acc[4] + x[4],
                ])
            },
        )
        .try_reduce(
            || [0.0f64; 5],
            |a, b| {
                Ok([
                    a[0].max(b[0]),
                    a[1] + b[1],
                    a[2].max(b[2]),
                    a[3].max(b[3]),
                    a[4] + b[4],
                ])
            },
        )?;
    let draws = n as u64;
    let with_draws = |mut r: TestReport| {
        r.draws = draws;
        r
    };
    let mut out = vec![
        with_draws(TestReport::deterministic(
            "mass",
            stats[0],
            1e-12,
            "max |sum P + remainder - 1|",
        )),
        with_draws(TestReport::deterministic(
            "ordering",
            stats[1] + stats[4],
            0.0,
            "count of sticks without 0 < W - R and 0 < 1 - W, or non-finite",
        )),
    ];
    if !has_r || s.pipeline() == Pipeline::General || (s.pipeline() == Pipeline::Gem && m >= 2) {
        // no exponential clock on these paths
    } else {
        out.push(with_draws(TestReport::deterministic(
            "exponential-clock",
            stats[2],
            GTILDE_ULPS,
            "max |log(lambda^a / prod R^a) - log(G + lambda^a)| in ulps of the summed log magnitudes",
        )));
    }
    if general {
        out.push(with_draws(TestReport::deterministic(
            "lambda-path",
            stats[3],
            PATH_TOL,
            "max relative error of lambda_j R_j = lambda_(j-1)",
        )));
    }
    Ok(out)
}

/// Exponential-clock identity, in units of `ε (|log λ^α| + Σ|α log R_j| + |log(G̃ + λ^α)| + 1)`.
const GTILDE_ULPS: f64 = 4.0;
/// `λ_j R_j` against `λ_{j-1}`: two roundings.
const PATH_TOL: f64 = 2.0 * f64::EPSILON;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_usage_error() {
        let err = run_suite("bogus", &SuiteConfig::default(), &RngState::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn bonferroni_divides_the_level() {
        let cfg = SuiteConfig {
            draws: 2000,
            bonferroni: true,
            alphas: Some(vec![0.5]),
            lambdas: Some(vec![1.0]),
            ..SuiteConfig::default()
        };
        let reports = run_suite("moments", &cfg, &RngState::new(1, 0)).unwrap();
        let plain = SuiteConfig {
            bonferroni: false,
            ..cfg.clone()
        };
        let reports2 = run_suite("moments", &plain, &RngState::new(1, 0)).unwrap();
        for (a, b) in reports.iter().zip(&reports2) {
            assert_eq!(a.statistic, b.statistic);
            assert!(a.threshold >= b.threshold);
        }
    }

    #[test]
    fn reports_replay_from_their_seed() {
        let cfg = SuiteConfig {
            draws: 500,
            alphas: Some(vec![0.5]),
            ..SuiteConfig::default()
        };
        let a = run_suite("stirling", &cfg, &RngState::new(5, 9)).unwrap();
        let b = run_suite("stirling", &cfg, &RngState::new(5, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.seed.is_some()));
    }
}
