//! Acceptance criteria 1 to 9, one pass/fail line each. Every statistical
//! check runs at level 0.001 on its own, with 10^5 draws, and the per-draw
//! identities run over 10^6 draws.

use std::process::{Command, ExitCode};
use std::time::Instant;

use condstick_core::samplers::RngState;
use condstick_core::verify::{run_suite, SuiteConfig, TestReport};

const SEED: u64 = 20_240_917;

fn config() -> SuiteConfig {
    SuiteConfig {
        draws: 100_000,
        identity_draws: 1_000_000,
        level: 0.001,
        bonferroni: false,
        ..SuiteConfig::default()
    }
}

fn suite(name: &str, index: u64) -> Vec<TestReport> {
    run_suite(name, &config(), &RngState::new(SEED, 0).child(index)).expect("suite runs")
}

fn select<'a>(reports: &'a [TestReport], prefixes: &[&str]) -> Vec<&'a TestReport> {
    reports
        .iter()
        .filter(|r| prefixes.iter().any(|p| r.suite.starts_with(p)))
        .collect()
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn summarize(reports: &[&TestReport]) -> Verdict {
    let failed: Vec<&&TestReport> = reports.iter().filter(|r| !r.passed).collect();
    let passed = !reports.is_empty() && failed.is_empty();
    let mut detail = format!(
        "{}/{} checks passed",
        reports.len() - failed.len(),
        reports.len()
    );
    for r in failed.iter().take(5) {
        detail.push_str(&format!(
            "; FAILED {} (statistic {:e} > threshold {:e})",
            r.suite, r.statistic, r.threshold
        ));
    }
    Verdict { passed, detail }
}

fn determinism() -> Verdict {
    let args = [
        "sample",
        "--law",
        "gem",
        "--alpha",
        "0.5",
        "--theta",
        "0.5",
        "--m",
        "2",
        "--n-sticks",
        "5",
        "--draws",
        "3",
        "--seed",
        "42",
        "--stream",
        "7",
    ];
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_condstick"))
            .args(args)
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let passed =
        a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    Verdict {
        passed,
        detail: format!(
            "two runs, {} and {} bytes, identical: {}",
            a.stdout.len(),
            b.stdout.len(),
            a.stdout == b.stdout
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let stirling = suite("stirling", 1);
    let normalization = suite("normalization", 0);
    let half = suite("half", 6);
    let transfer = suite("transfer", 3);
    let gem = suite("gem", 4);
    let binomial = suite("binomial", 5);
    let pipelines = suite("pipelines", 7);

    let criteria: Vec<(&str, Verdict)> =
        vec![
        (
            "Stirling numbers vs exact rationals (1e-10), tilted moments vs derivatives (1e-6)",
            summarize(&select(&stirling, &["stirling/exact-sum/", "stirling/derivative/"])),
        ),
        (
            "densities integrate to 1 within 1e-6, pmf tables sum to 1 within 1e-12",
            summarize(&select(&normalization, &["normalization/"])),
        ),
        (
            "alpha = 1/2 closed form (1e-10) and inverse Gaussian KS",
            summarize(&select(&half, &["half/closed-form", "half/inverse-gaussian/"])),
        ),
        (
            "transfer identity two-sample KS over the (alpha, m, k, lambda) grid",
            summarize(&select(&transfer, &["transfer/identity/"])),
        ),
        (
            "GEM recovery: 1 - W_k ~ Beta(1 - alpha, theta + k alpha), k <= 5, and correlations",
            summarize(&select(&gem, &["gem/sticks/"])),
        ),
        (
            "N_1 - 1 ~ Binomial(3, 1 - W_1) chi-square over W_1 deciles",
            summarize(&select(&binomial, &["binomial/"])),
        ),
        (
            "general(m=1) vs m1 and half(m=0) vs m0 on W_1 and P_1",
            summarize(&select(&pipelines, &["pipelines/general-vs-m1/", "pipelines/half-vs-m0/"])),
        ),
        (
            "per-draw identities over 10^6 draws with zero violations",
            summarize(&select(&pipelines, &["pipelines/identities/"])),
        ),
        ("fixed (seed, stream) gives byte-identical CLI output", determinism()),
    ];

    let mut all = true;
    for (i, (name, v)) in criteria.iter().enumerate() {
        all &= v.passed;
        println!(
            "criterion {}: {} - {name} [{}]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {} in {:.1}s",
        if all { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
