//! Statistical verification: Kolmogorov-Smirnov, chi-square and moment
//! checks, closed-form oracles, and named suites that tie them to the
//! samplers and pipelines.

pub mod oracles;
mod suites;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::samplers::{RngSeed, RngState};
use crate::specfun::PmfTable;

pub use suites::{run_suite, SuiteConfig, SUITE_NAMES};

/// Default significance level of every statistical test.
pub const DEFAULT_LEVEL: f64 = 0.001;

/// Outcome of one check.
///
/// `passed` is `statistic <= threshold`. For statistical tests `threshold`
/// is the critical value at the level in force and `p_value` is reported;
/// for deterministic checks `statistic` is an error and `threshold` its
/// tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub draws: u64,
    pub seed: Option<RngSeed>,
    pub passed: bool,
    pub detail: String,
}

impl TestReport {
    pub fn deterministic(
        suite: impl Into<String>,
        error: f64,
        tol: f64,
        detail: impl Into<String>,
    ) -> Self {
        TestReport {
            suite: suite.into(),
            statistic: error,
            threshold: tol,
            p_value: None,
            draws: 0,
            seed: None,
            passed: error <= tol,
            detail: detail.into(),
        }
    }

    pub fn named(mut self, suite: impl Into<String>) -> Self {
        self.suite = suite.into();
        self
    }

    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// One JSON object on one line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level must lie in (0, 1), got {level}"));
    }
    Ok(())
}

/// `c(level)` with `P(sup|B| > c) ≈ level` for the Brownian bridge.
fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

fn ks_effective(ne: f64) -> f64 {
    let s = ne.sqrt();
    s + 0.12 + 0.11 / s
}

/// Kolmogorov tail `Q(x) = 2 Σ (-1)^{k-1} e^{-2k²x²}`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.27 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn finite_sorted(a: &[f64], what: &str) -> Result<Vec<f64>> {
    if a.is_empty() {
        return domain(format!("{what} sample is empty"));
    }
    if a.iter().any(|x| x.is_nan()) {
        return domain(format!("{what} sample contains NaN"));
    }
    let mut v = a.to_vec();
    v.par_sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(v)
}

fn ks_report(d: f64, ne: f64, level: f64, draws: usize, suite: &str) -> TestReport {
    let scale = ks_effective(ne);
    let threshold = ks_coefficient(level) / scale;
    TestReport {
        suite: suite.into(),
        statistic: d,
        threshold,
        p_value: Some(kolmogorov_q(scale * d)),
        draws: draws as u64,
        seed: None,
        passed: d <= threshold,
        detail: String::new(),
    }
}

/// Two-sided two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<TestReport> {
    check_level(level)?;
    let a = finite_sorted(a, "first")?;
    let b = finite_sorted(b, "second")?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = a[i].min(b[j]);
        while i < n && a[i] == t {
            i += 1;
        }
        while j < m && b[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    Ok(ks_report(d, ne, level, n + m, "ks_two_sample"))
}

/// Two-sided one-sample Kolmogorov-Smirnov test against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64 + Sync>(
    a: &[f64],
    cdf: F,
    level: f64,
) -> Result<TestReport> {
    check_level(level)?;
    let a = finite_sorted(a, "input")?;
    let n = a.len() as f64;
    let d = a
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .reduce(|| 0.0, f64::max);
    Ok(ks_report(d, n, level, a.len(), "ks_one_sample"))
}

/// Merges adjacent cells until each expected count is at least 5.
fn pool_cells(observed: &[f64], expected: &[f64]) -> Vec<(f64, f64)> {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    cells
}

/// Pearson chi-square over independent groups, each with its total fixed;
/// every group contributes (pooled cells - 1) degrees of freedom.
pub fn chi_square_groups(groups: &[(Vec<f64>, Vec<f64>)], level: f64) -> Result<TestReport> {
    check_level(level)?;
    let mut stat = 0.0;
    let mut dof = 0usize;
    let mut draws = 0.0;
    for (obs, exp) in groups {
        if obs.len() != exp.len() {
            return domain("observed and expected lengths differ");
        }
        if exp.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return domain("expected counts must be finite and nonnegative");
        }
        let cells = pool_cells(obs, exp);
        if cells.len() < 2 {
            continue;
        }
        dof += cells.len() - 1;
        for (o, e) in cells {
            stat += (o - e) * (o - e) / e;
        }
        draws += obs.iter().sum::<f64>();
    }
    if dof == 0 {
        return domain("fewer than two cells with expected count >= 5");
    }
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    let threshold = chi.inverse_cdf(1.0 - level);
    Ok(TestReport {
        suite: "chi_square".into(),
        statistic: stat,
        threshold,
        p_value: Some(chi.sf(stat)),
        draws: draws as u64,
        seed: None,
        passed: stat <= threshold,
        detail: format!("dof={dof}"),
    })
}

/// Pearson chi-square of block counts `counts[k-1]` against `pmf`.
pub fn chi_square_pmf(counts: &[u64], pmf: &PmfTable, level: f64) -> Result<TestReport> {
    if counts.len() != pmf.len() {
        return domain(format!(
            "{} counts for a pmf with {} cells",
            counts.len(),
            pmf.len()
        ));
    }
    if pmf.len() < 2 {
        return domain("a single-cell pmf admits no chi-square test");
    }
    let n: u64 = counts.iter().sum();
    let obs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let exp: Vec<f64> = pmf.probs().iter().map(|p| p * n as f64).collect();
    chi_square_groups(&[(obs, exp)], level).map(|r| r.named("chi_square_pmf"))
}

/// Two-sided normal quantile for `level`.
pub fn sigmas_for_level(level: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(1.0 - level / 2.0)
}

/// Passes iff `|mean - target| <= level_sigmas * sd/√n`.
pub fn moment_check(draws: &[f64], target: f64, level_sigmas: f64) -> Result<TestReport> {
    if draws.len() < 2 {
        return domain("moment check needs at least two draws");
    }
    if draws.iter().any(|x| !x.is_finite()) {
        return domain("moment check needs finite draws");
    }
    let n = draws.len() as f64;
    let mean = draws.par_iter().sum::<f64>() / n;
    let var = draws
        .par_iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1.0);
    let se = (var / n).sqrt();
    let z = if se > 0.0 {
        (mean - target).abs() / se
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(TestReport {
        suite: "moment_check".into(),
        statistic: z,
        threshold: level_sigmas,
        p_value: Some(erfc(z / std::f64::consts::SQRT_2)),
        draws: draws.len() as u64,
        seed: None,
        passed: z <= level_sigmas,
        detail: format!("mean={mean} target={target} se={se}"),
    })
}

/// Sample Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// `|ρ̂| < 4/√n`.
pub fn correlation_check(x: &[f64], y: &[f64]) -> Result<TestReport> {
    if x.len() != y.len() || x.len() < 3 {
        return domain("correlation needs two equal-length samples of size >= 3");
    }
    let rho = correlation(x, y);
    let threshold = 4.0 / (x.len() as f64).sqrt();
    Ok(TestReport {
        suite: "correlation".into(),
        statistic: rho.abs(),
        threshold,
        p_value: None,
        draws: x.len() as u64,
        seed: None,
        passed: rho.abs() < threshold,
        detail: format!("rho={rho}"),
    })
}

/// Runs `f` on `n` independent child streams of `rng`, in parallel, in a
/// deterministic order.
pub fn par_draws<T, F>(rng: &RngState, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngState) -> Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(&mut rng.child(i as u64)))
        .collect()
}
