//! `condstick`: sampling, pmf and density tables, and verification suites
//! for conditioned Pitman-Yor stick-breaking.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use condstick_core::samplers::RngState;
use condstick_core::specfun::density::{tabulate, total_mass, Density};
use condstick_core::specfun::kernel::{n_conditional_pmf, Kernel};
use condstick_core::specfun::{
    CondStableDensity, GemLambdaDensity, PmfTable, R1mDensity, StableDensity, WConditionalDensity,
    YDensity,
};
use condstick_core::stickbreak::{LawSpec, Pipeline, StickDraw, StickSampler};
use condstick_core::verify::{run_suite, SuiteConfig, TestReport, DEFAULT_LEVEL, SUITE_NAMES};
use condstick_core::{Alpha, Error};

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Parser)]
#[command(
    name = "condstick",
    version,
    about = "Conditioned Pitman-Yor stick-breaking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw stick-breaking sequences, one record per stick.
    Sample(SampleArgs),
    /// Tabulate a pmf as (k, probability) rows.
    Pmf(PmfArgs),
    /// Tabulate a density as (t, f) rows over a grid.
    Density(DensityArgs),
    /// Run verification suites and emit one report per check.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    M0,
    M1,
    General,
    Gem,
    Half,
}

#[derive(Clone, Copy, ValueEnum)]
enum PmfKind {
    Blocks,
    BlocksCond,
    NMarginal,
    NCond,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityKind {
    Stable,
    CondStable,
    Y,
    R1m,
    WCond,
    GemLambda,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    law: Law,
    #[arg(long)]
    alpha: f64,
    /// Mix the rate so that the sticks follow PD(alpha, theta).
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    n_sticks: usize,
    #[arg(long, default_value_t = 1)]
    draws: usize,
    /// Stop each draw once the remainder falls below this value, using
    /// `--n-sticks` as the cap.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct PmfArgs {
    #[arg(long, value_enum)]
    which: PmfKind,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    lambda: Option<f64>,
    /// Conditioning value for `n-cond`.
    #[arg(long)]
    r: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long, value_enum)]
    which: DensityKind,
    #[arg(long)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Tilt exponent for `cond-stable`; defaults to `m`.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Conditioning value for `w-cond`.
    #[arg(long)]
    r: Option<f64>,
    /// Grid bounds; default to the window holding all but a negligible mass.
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    /// Draws for the per-draw exact identities.
    #[arg(long, default_value_t = 1_000_000)]
    identity_draws: usize,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    /// Test every check at `--level` instead of splitting it across the suite.
    #[arg(long)]
    no_bonferroni: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, value_enum, default_value = "json-lines")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(format!("i/o error: {e}"))
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Pmf(a) => pmf(a),
        Command::Density(a) => density(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("condstick: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("condstick: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Writes rows in the chosen format; values are rendered as JSON scalars so
/// floats use the shortest round-trip representation.
struct Table {
    sink: BufWriter<Box<dyn Write>>,
    format: Format,
    columns: &'static [&'static str],
}

impl Table {
    fn open(
        path: Option<&PathBuf>,
        format: Format,
        columns: &'static [&'static str],
    ) -> io::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        };
        let mut t = Table {
            sink: BufWriter::new(inner),
            format,
            columns,
        };
        if let Format::Csv = format {
            writeln!(t.sink, "{}", columns.join(","))?;
        }
        Ok(t)
    }

    fn row(&mut self, values: &[Value]) -> io::Result<()> {
        match self.format {
            Format::Csv => {
                let cells: Vec<String> = values
                    .iter()
                    .map(|v| match v {
                        Value::Null => String::new(),
                        Value::String(s) => csv_quote(s),
                        other => other.to_string(),
                    })
                    .collect();
                writeln!(self.sink, "{}", cells.join(","))
            }
            Format::JsonLines => {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .map(|c| c.to_string())
                    .zip(values.iter().cloned())
                    .collect();
                writeln!(self.sink, "{}", Value::Object(obj))
            }
        }
    }

    fn finish(mut self) -> io::Result<()> {
        self.sink.flush()
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

fn opt_num(v: Option<&f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

// ------------------------------------------------------------------ sample

const SAMPLE_COLUMNS: &[&str] = &[
    "draw_index",
    "k",
    "W_k",
    "R_k",
    "N_k",
    "Ptilde_k",
    "remainder",
    "lambda_k",
];

fn law_from_args(a: &SampleArgs) -> std::result::Result<(LawSpec, Pipeline), Failure> {
    let alpha = Alpha::new(a.alpha)?;
    let pipeline = match a.law {
        Law::M0 => Pipeline::M0,
        Law::M1 => Pipeline::M1,
        Law::General => Pipeline::General,
        Law::Gem => Pipeline::Gem,
        Law::Half => Pipeline::Half,
    };
    let spec = match (a.theta, a.lambda) {
        (Some(_), Some(_)) => return usage("give either --theta or --lambda, not both"),
        (Some(theta), None) => LawSpec::gem(alpha, theta, a.m)?,
        (None, Some(l)) => {
            if let Pipeline::Gem = pipeline {
                return usage("law gem needs --theta");
            }
            LawSpec::fixed(alpha, a.m, l)?
        }
        (None, None) => return usage("give --lambda, or --theta to mix the rate"),
    };
    Ok((spec, pipeline))
}

fn sample(a: SampleArgs) -> Outcome {
    if a.n_sticks == 0 {
        return usage("--n-sticks must be positive");
    }
    if a.draws == 0 {
        return usage("--draws must be positive");
    }
    let (spec, pipeline) = law_from_args(&a)?;
    let sampler = StickSampler::new(spec, pipeline)?;
    let root = RngState::new(a.seed, a.stream);
    let mut table = Table::open(a.out.output.as_ref(), a.out.format, SAMPLE_COLUMNS)?;
    for i in 0..a.draws {
        let mut rng = root.child(i as u64);
        let d = match a.epsilon {
            Some(eps) => sampler.draw_until(eps, a.n_sticks, &mut rng)?,
            None => sampler.draw(a.n_sticks, &mut rng)?,
        };
        write_draw(&mut table, i, &d)?;
    }
    table.finish()?;
    Ok(true)
}

fn write_draw(table: &mut Table, index: usize, d: &StickDraw) -> io::Result<()> {
    let mut remainder = 1.0;
    for k in 0..d.len() {
        remainder *= d.w[k];
        let row = [
            json!(index),
            json!(k + 1),
            num(d.w[k]),
            opt_num(d.r.get(k)),
            d.n.get(k).map_or(Value::Null, |n| json!(n)),
            num(d.ptilde[k]),
            num(if k + 1 == d.len() {
                d.remainder
            } else {
                remainder
            }),
            opt_num(d.lambda_path.get(k + 1)),
        ];
        table.row(&row)?;
    }
    Ok(())
}

// --------------------------------------------------------------------- pmf

fn pmf(a: PmfArgs) -> Outcome {
    let alpha = Alpha::new(a.alpha)?;
    let need_lambda = || {
        a.lambda
            .ok_or_else(|| Failure::Usage("this pmf needs --lambda".into()))
    };
    let table: PmfTable = match a.which {
        PmfKind::Blocks => Kernel::new(alpha, a.m.max(1))?.pd_block_pmf(a.m)?,
        PmfKind::BlocksCond => {
            Kernel::new(alpha, a.m.max(1))?.block_pmf_conditional(a.m, need_lambda()?)?
        }
        PmfKind::NMarginal => {
            Kernel::new(alpha, a.m.max(1))?.n_marginal_pmf(a.m, need_lambda()?)?
        }
        PmfKind::NCond => {
            let r =
                a.r.ok_or_else(|| Failure::Usage("n-cond needs --r".into()))?;
            n_conditional_pmf(a.m, r, alpha)?
        }
    };
    let mut out = Table::open(a.out.output.as_ref(), a.out.format, &["k", "probability"])?;
    for (i, p) in table.probs().into_iter().enumerate() {
        out.row(&[json!(i + table.support_min()), num(p)])?;
    }
    out.finish()?;
    Ok(true)
}

// ----------------------------------------------------------------- density

fn density(a: DensityArgs) -> Outcome {
    let alpha = Alpha::new(a.alpha)?;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Failure::Usage(format!("this density needs --{name}")))
    };
    let need_m = || {
        a.m.ok_or_else(|| Failure::Usage("this density needs --m".into()))
    };
    let d: Box<dyn Density> = match a.which {
        DensityKind::Stable => Box::new(StableDensity::new(alpha)),
        DensityKind::CondStable => {
            let rho = match (a.rho, a.m) {
                (Some(r), _) => r,
                (None, Some(m)) => m as f64,
                (None, None) => return usage("cond-stable needs --rho or --m"),
            };
            Box::new(CondStableDensity::new(
                alpha,
                need(a.lambda, "lambda")?,
                rho,
            )?)
        }
        DensityKind::Y => {
            let k = a.k.ok_or_else(|| Failure::Usage("y needs --k".into()))?;
            Box::new(YDensity::new(
                alpha,
                need(a.lambda, "lambda")?,
                need_m()?,
                k,
            )?)
        }
        DensityKind::R1m => {
            let k = a.k.ok_or_else(|| Failure::Usage("r1m needs --k".into()))?;
            Box::new(R1mDensity::new(
                alpha,
                need(a.lambda, "lambda")?,
                need_m()?,
                k,
            )?)
        }
        DensityKind::WCond => {
            Box::new(WConditionalDensity::new(alpha, need(a.r, "r")?, need_m()?)?)
        }
        DensityKind::GemLambda => Box::new(GemLambdaDensity::new(
            alpha,
            need(a.theta, "theta")?,
            need_m()?,
        )?),
    };
    let (min, max) = match (a.min, a.max) {
        (Some(lo), Some(hi)) => (lo, hi),
        (lo, hi) => {
            let win = total_mass(d.as_ref(), &Default::default())?.window;
            (lo.unwrap_or(win.0), hi.unwrap_or(win.1))
        }
    };
    let grid = tabulate(d.as_ref(), min, max, a.points)?;
    let mut out = Table::open(a.out.output.as_ref(), a.out.format, &["t", "f"])?;
    for (t, f) in grid.points {
        out.row(&[num(t), num(f)])?;
    }
    out.finish()?;
    Ok(true)
}

// ------------------------------------------------------------------ verify

const REPORT_COLUMNS: &[&str] = &[
    "suite",
    "statistic",
    "threshold",
    "p_value",
    "draws",
    "seed",
    "passed",
    "detail",
];

fn verify(a: VerifyArgs) -> Outcome {
    let names: Vec<&str> = if a.suite == "all" {
        SUITE_NAMES.to_vec()
    } else {
        vec![a.suite.as_str()]
    };
    let cfg = SuiteConfig {
        draws: a.draws,
        identity_draws: a.identity_draws,
        level: a.level,
        bonferroni: !a.no_bonferroni,
        alphas: a.alpha.clone(),
        thetas: a.theta.clone(),
        ms: a.m.clone(),
        lambdas: a.lambda.clone(),
        ..SuiteConfig::default()
    };
    if cfg.draws == 0 {
        return usage("--draws must be positive");
    }
    let root = RngState::new(a.seed, a.stream);
    let mut out = Table::open(a.output.as_ref(), a.format, REPORT_COLUMNS)?;
    let mut all_passed = true;
    for name in names {
        // each suite keeps its own stream whether run alone or with the rest
        let index = SUITE_NAMES
            .iter()
            .position(|s| *s == name)
            .unwrap_or(SUITE_NAMES.len());
        let reports = run_suite(name, &cfg, &root.child(index as u64))?;
        for r in &reports {
            all_passed &= r.passed;
            write_report(&mut out, a.format, r)?;
        }
    }
    out.finish()?;
    Ok(all_passed)
}

fn write_report(out: &mut Table, format: Format, r: &TestReport) -> io::Result<()> {
    match format {
        Format::JsonLines => writeln!(out.sink, "{}", r.to_json_line()),
        Format::Csv => {
            let v = serde_json::to_value(r).expect("report serializes");
            let row: Vec<Value> = REPORT_COLUMNS
                .iter()
                .map(|c| match &v[*c] {
                    Value::Object(_) => Value::String(v[*c].to_string()),
                    other => other.clone(),
                })
                .collect();
            out.row(&row)
        }
    }
}
