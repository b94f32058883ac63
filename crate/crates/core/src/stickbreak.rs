//! Stick-breaking pipelines for the conditioned laws, mass assembly and
//! truncation.
//!
//! All pipelines produce sticks in order and consume randomness stick by
//! stick, so a run with `n` sticks is a prefix of a run with `n' > n` sticks
//! from the same [`RngState`]. [`StickSampler::draw_until`] relies on this.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::samplers::{
    sample_beta_pair, sample_gem_lambda, CondSampler, RStepper, RngSeed, RngState,
};
use crate::Alpha;

/// Default truncation level for [`StickSampler::draw_until`].
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// How the rate `λ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    Fixed(f64),
    /// `λ` drawn afresh per draw so that the mixture is `PD(α, θ)`.
    Gem {
        theta: f64,
    },
}

/// A conditioned law: `α`, the count `m` and the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub alpha: Alpha,
    pub m: usize,
    pub rate: Rate,
}

impl LawSpec {
    pub fn fixed(alpha: Alpha, m: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be finite and >= 0, got {lambda}"));
        }
        if lambda == 0.0 && m > 0 {
            return domain("lambda = 0 is only allowed with m = 0");
        }
        Ok(LawSpec {
            alpha,
            m,
            rate: Rate::Fixed(lambda),
        })
    }

    pub fn gem(alpha: Alpha, theta: f64, m: usize) -> Result<Self> {
        if !(theta > -alpha.get()) || !theta.is_finite() {
            return domain(format!("theta must exceed -alpha, got {theta}"));
        }
        if m == 0 && !(theta > 0.0) {
            return domain(format!(
                "GEM mixing with m = 0 needs theta > 0, got {theta}"
            ));
        }
        Ok(LawSpec {
            alpha,
            m,
            rate: Rate::Gem { theta },
        })
    }
}

/// Stick-breaking construction to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    M0,
    M1,
    General,
    /// Chooses `M0`, `M1` or `General` from `m`.
    Gem,
    /// Brownian construction, `α = 1/2` only.
    Half,
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m0" => Ok(Pipeline::M0),
            "m1" => Ok(Pipeline::M1),
            "general" => Ok(Pipeline::General),
            "gem" => Ok(Pipeline::Gem),
            "half" => Ok(Pipeline::Half),
            _ => Err(Error::Usage(format!("unknown law '{s}'"))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::M0 => "m0",
            Pipeline::M1 => "m1",
            Pipeline::General => "general",
            Pipeline::Gem => "gem",
            Pipeline::Half => "half",
        })
    }
}

/// One realized stick sequence.
///
/// `one_minus_w` and `w_minus_r` hold the exact gaps `1 - W_k` and
/// `W_k - R_k`; in floating point `W_k` itself can round onto `1` or `R_k`.
/// `r`, `one_minus_r` and `w_minus_r` are empty on the `α = 1/2` path, `n`
/// is empty unless the general pipeline ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickDraw {
    pub w: Vec<f64>,
    pub one_minus_w: Vec<f64>,
    pub w_minus_r: Vec<f64>,
    pub r: Vec<f64>,
    pub one_minus_r: Vec<f64>,
    pub n: Vec<usize>,
    /// `G̃_k` behind `R_k` on the `m = 0` and `m = 1` paths.
    pub gtilde: Vec<f64>,
    pub ptilde: Vec<f64>,
    pub remainder: f64,
    /// `λ_0, ..., λ_n`; only `λ_0` on the `α = 1/2` path.
    pub lambda_path: Vec<f64>,
    /// `s² = 1/(2 S_{1/2,m}(λ))` on the `α = 1/2` path.
    pub s2: Option<f64>,
    pub rng: RngSeed,
}

impl StickDraw {
    fn empty(n: usize, lambda: f64, rng: RngSeed) -> Self {
        let mut lambda_path = Vec::with_capacity(n + 1);
        lambda_path.push(lambda);
        StickDraw {
            w: Vec::with_capacity(n),
            one_minus_w: Vec::with_capacity(n),
            w_minus_r: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            one_minus_r: Vec::with_capacity(n),
            n: Vec::new(),
            gtilde: Vec::new(),
            ptilde: Vec::new(),
            remainder: 1.0,
            lambda_path,
            s2: None,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Pushes a stick given `(1 - W, W - R, R, 1 - R)`.
    fn push_residual(&mut self, v: f64, wmr: f64, r: f64, one_minus_r: f64) {
        let w = if v < 0.5 { 1.0 - v } else { r + wmr };
        self.w.push(w);
        self.one_minus_w.push(v);
        self.w_minus_r.push(wmr);
        self.r.push(r);
        self.one_minus_r.push(one_minus_r);
    }

    fn finish(&mut self) {
        let (p, rem) = masses_from_complements(&self.w, &self.one_minus_w);
        self.ptilde = p;
        self.remainder = rem;
    }
}

fn masses_from_complements(w: &[f64], v: &[f64]) -> (Vec<f64>, f64) {
    let mut prod = 1.0;
    let mut out = Vec::with_capacity(w.len());
    for (wk, vk) in w.iter().zip(v) {
        out.push(vk * prod);
        prod *= wk;
    }
    (out, prod)
}

/// Stick masses `(1 - W_k) Π_{i<k} W_i` and the remainder `Π W_i`.
pub fn weights_to_masses(w: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Some(bad) = w.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return domain(format!("stick weights must lie in (0, 1), got {bad}"));
    }
    let v: Vec<f64> = w.iter().map(|x| 1.0 - x).collect();
    Ok(masses_from_complements(w, &v))
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A law and pipeline, validated, with the tables the pipeline needs.
#[derive(Debug, Clone)]
pub struct StickSampler {
    law: LawSpec,
    pipeline: Pipeline,
    sampler: CondSampler,
}

impl StickSampler {
    pub fn new(law: LawSpec, pipeline: Pipeline) -> Result<Self> {
        let m = law.m;
        if let Rate::Fixed(lambda) = law.rate {
            LawSpec::fixed(law.alpha, m, lambda)?;
        } else if let Rate::Gem { theta } = law.rate {
            LawSpec::gem(law.alpha, theta, m)?;
        }
        let fixed_zero = matches!(law.rate, Rate::Fixed(l) if l == 0.0);
        match pipeline {
            Pipeline::M0 if m != 0 => return domain("the m0 law needs m = 0"),
            Pipeline::M1 if m != 1 => return domain("the m1 law needs m = 1"),
            Pipeline::General if m == 0 => return domain("the general law needs m >= 1"),
            Pipeline::Gem if !matches!(law.rate, Rate::Gem { .. }) => {
                return domain("the gem law needs a theta")
            }
            Pipeline::Half if law.alpha.get() != 0.5 => {
                return domain("the half law needs alpha = 0.5")
            }
            Pipeline::Half if fixed_zero => return domain("the half law needs lambda > 0"),
            _ => {}
        }
        Ok(StickSampler {
            law,
            pipeline,
            sampler: CondSampler::new(law.alpha, m.max(1))?,
        })
    }

    pub fn law(&self) -> &LawSpec {
        &self.law
    }

    pub fn pipeline(&self) -> Pipeline {
        self.pipeline
    }

    /// First `n` sticks.
    pub fn draw(&self, n: usize, rng: &mut RngState) -> Result<StickDraw> {
        if n == 0 {
            return domain("at least one stick is required");
        }
        let snap = rng.snapshot();
        let a = self.law.alpha;
        let m = self.law.m;
        let lambda = match self.law.rate {
            Rate::Fixed(l) => l,
            Rate::Gem { theta } => sample_gem_lambda(m, theta, a, rng)?,
        };
        let pipeline = match self.pipeline {
            Pipeline::Gem => match m {
                0 => Pipeline::M0,
                1 => Pipeline::M1,
                _ => Pipeline::General,
            },
            p => p,
        };
        let mut d = StickDraw::empty(n, lambda, snap);
        match pipeline {
            Pipeline::M0 => self.run_m0(&mut d, lambda, n, rng),
            Pipeline::M1 => self.run_m1(&mut d, lambda, n, rng),
            Pipeline::General => self.run_general(&mut d, lambda, n, rng)?,
            Pipeline::Half => self.run_half(&mut d, lambda, n, rng)?,
            Pipeline::Gem => unreachable!(),
        }
        d.finish();
        Ok(d)
    }

    /// Smallest power-of-two number of sticks (from 16, at most `max_n`)
    /// whose remainder is below `eps`. `rng` ends where that run ended.
    pub fn draw_until(&self, eps: f64, max_n: usize, rng: &mut RngState) -> Result<StickDraw> {
        let mut n = 16usize.min(max_n.max(1));
        loop {
            let mut trial = rng.clone();
            let d = self.draw(n, &mut trial)?;
            if d.remainder < eps {
                *rng = trial;
                return Ok(d);
            }
            if n >= max_n {
                return Err(Error::Numeric {
                    message: format!("remainder still above {eps:e} after {n} sticks"),
                    achieved_error: d.remainder,
                });
            }
            n = (2 * n).min(max_n);
        }
    }

    fn run_m0(&self, d: &mut StickDraw, lambda: f64, n: usize, rng: &mut RngState) {
        let a = self.law.alpha;
        let mut st = RStepper::new(lambda, a);
        for _ in 0..n {
            let s = st.step(rng);
            let (b, bc) = sample_beta_pair(a.complement(), a.get(), rng);
            d.push_residual(b * s.one_minus_r, bc * s.one_minus_r, s.r, s.one_minus_r);
            d.gtilde.push(s.gtilde);
            d.lambda_path.push((s.gtilde + st.x()).powf(1.0 / a.get()));
        }
    }

    fn run_m1(&self, d: &mut StickDraw, lambda: f64, n: usize, rng: &mut RngState) {
        let a = self.law.alpha;
        let mut st = RStepper::new(lambda, a);
        for _ in 0..n {
            let s = st.step(rng);
            let (b, bc) = sample_beta_pair(a.complement(), a.get(), rng);
            // x = β(1 - R)/R, W = 1/(1 + x)
            let ln_x = b.ln() + s.one_minus_r.ln() - s.r.ln();
            let w = logistic(-ln_x);
            d.push_residual(logistic(ln_x), bc * s.one_minus_r * w, s.r, s.one_minus_r);
            d.gtilde.push(s.gtilde);
            d.lambda_path.push((s.gtilde + st.x()).powf(1.0 / a.get()));
        }
    }

    fn run_general(
        &self,
        d: &mut StickDraw,
        lambda: f64,
        n: usize,
        rng: &mut RngState,
    ) -> Result<()> {
        let a = self.law.alpha.get();
        let m = self.law.m;
        let kernel = self.sampler.kernel();
        let mut lam = lambda;
        for _ in 0..n {
            let q = kernel.n_marginal_pmf(m, lam)?;
            let k = q.quantile(rng.random_open01());
            let y = self.sampler.y(m, m - k, lam, rng)?;
            let total = lam + y;
            let r = lam / total;
            let one_minus_r = y / total;
            let (b, bc) = sample_beta_pair(k as f64 - a, a, rng);
            // (1 - R)/R = Y/λ
            let ln_x = b.ln() + y.ln() - lam.ln();
            let w = logistic(-ln_x);
            d.push_residual(logistic(ln_x), bc * one_minus_r * w, r, one_minus_r);
            d.n.push(k);
            d.lambda_path.push(total);
            lam = total;
        }
        Ok(())
    }

    fn run_half(&self, d: &mut StickDraw, lambda: f64, n: usize, rng: &mut RngState) -> Result<()> {
        let s = self.sampler.cond_stable(self.law.m, lambda, rng)?;
        let s2 = 0.5 / s;
        d.s2 = Some(s2);
        let mut q = 0.0;
        for _ in 0..n {
            let z = rng.standard_normal();
            let x = z * z;
            let next = q + x;
            d.w.push((q + s2) / (next + s2));
            d.one_minus_w.push(x / (next + s2));
            q = next;
        }
        Ok(())
    }
}

/// Sticks of the `m = 0` law at rate `λ ≥ 0`.
pub fn sticks_m0(lambda: f64, alpha: Alpha, n: usize, rng: &mut RngState) -> Result<StickDraw> {
    StickSampler::new(LawSpec::fixed(alpha, 0, lambda)?, Pipeline::M0)?.draw(n, rng)
}

/// Sticks of the `m = 1` law at rate `λ > 0`.
pub fn sticks_m1(lambda: f64, alpha: Alpha, n: usize, rng: &mut RngState) -> Result<StickDraw> {
    StickSampler::new(LawSpec::fixed(alpha, 1, lambda)?, Pipeline::M1)?.draw(n, rng)
}

/// Sticks of the law conditioned on `m ≥ 1` at rate `λ > 0`.
pub fn sticks_general(
    m: usize,
    lambda: f64,
    alpha: Alpha,
    n: usize,
    rng: &mut RngState,
) -> Result<StickDraw> {
    StickSampler::new(LawSpec::fixed(alpha, m, lambda)?, Pipeline::General)?.draw(n, rng)
}

/// `GEM(α, θ)` sticks obtained by mixing the count-`m` law over `λ`.
pub fn sticks_gem(
    alpha: Alpha,
    theta: f64,
    m: usize,
    n: usize,
    rng: &mut RngState,
) -> Result<StickDraw> {
    StickSampler::new(LawSpec::gem(alpha, theta, m)?, Pipeline::Gem)?.draw(n, rng)
}

/// Brownian construction of the `α = 1/2` law.
pub fn sticks_half(m: usize, lambda: f64, n: usize, rng: &mut RngState) -> Result<StickDraw> {
    StickSampler::new(LawSpec::fixed(Alpha::HALF, m, lambda)?, Pipeline::Half)?.draw(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_examples() {
        let (p, rem) = weights_to_masses(&[0.5, 0.5]).unwrap();
        assert_eq!(p, vec![0.5, 0.25]);
        assert_eq!(rem, 0.25);
        let (p, _) = weights_to_masses(&[0.3; 6]).unwrap();
        for (k, pk) in p.iter().enumerate() {
            assert!((pk - 0.7 * 0.3f64.powi(k as i32)).abs() < 1e-16);
        }
        assert!(weights_to_masses(&[0.5, 1.0]).is_err());
        assert!(weights_to_masses(&[0.0]).is_err());
    }

    #[test]
    fn law_validation() {
        let a = Alpha::new(0.4).unwrap();
        assert!(LawSpec::fixed(a, 1, 0.0).is_err());
        assert!(LawSpec::fixed(a, 0, 0.0).is_ok());
        assert!(LawSpec::gem(a, 0.0, 0).is_err());
        assert!(LawSpec::gem(a, -0.5, 2).is_err());
        let law = LawSpec::fixed(a, 2, 1.0).unwrap();
        assert!(StickSampler::new(law, Pipeline::M1).is_err());
        assert!(StickSampler::new(law, Pipeline::Half).is_err());
        assert!(StickSampler::new(law, Pipeline::Gem).is_err());
        assert!(StickSampler::new(law, Pipeline::General).is_ok());
        assert!("nope".parse::<Pipeline>().is_err());
    }

    #[test]
    fn every_pipeline_keeps_its_invariants() {
        let a = Alpha::new(0.5).unwrap();
        let laws = [
            (LawSpec::fixed(a, 0, 0.0).unwrap(), Pipeline::M0),
            (LawSpec::fixed(a, 0, 2.0).unwrap(), Pipeline::M0),
            (LawSpec::fixed(a, 1, 0.7).unwrap(), Pipeline::M1),
            (LawSpec::fixed(a, 3, 0.7).unwrap(), Pipeline::General),
            (LawSpec::gem(a, 0.5, 4).unwrap(), Pipeline::Gem),
            (LawSpec::fixed(a, 2, 1.0).unwrap(), Pipeline::Half),
        ];
        let mut rng = RngState::new(10, 0);
        for (law, p) in laws {
            let s = StickSampler::new(law, p).unwrap();
            for _ in 0..200 {
                let d = s.draw(25, &mut rng).unwrap();
                let total: f64 = d.ptilde.iter().sum::<f64>() + d.remainder;
                assert!((total - 1.0).abs() < 1e-12);
                for k in 0..d.len() {
                    assert!(d.one_minus_w[k] > 0.0);
                    if !d.r.is_empty() {
                        assert!(d.w_minus_r[k] > 0.0);
                    }
                }
                if p == Pipeline::General || (p == Pipeline::Gem) {
                    for j in 1..d.lambda_path.len() {
                        let back = d.lambda_path[j] * d.r[j - 1];
                        assert!((back / d.lambda_path[j - 1] - 1.0).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn longer_draw_extends_shorter_one() {
        let a = Alpha::new(0.3).unwrap();
        for (law, p) in [
            (LawSpec::fixed(a, 0, 1.0).unwrap(), Pipeline::M0),
            (LawSpec::fixed(a, 3, 1.0).unwrap(), Pipeline::General),
        ] {
            let s = StickSampler::new(law, p).unwrap();
            let short = s.draw(5, &mut RngState::new(2, 2)).unwrap();
            let long = s.draw(12, &mut RngState::new(2, 2)).unwrap();
            assert_eq!(short.w[..], long.w[..5]);
        }
    }

    #[test]
    fn truncation_reaches_epsilon() {
        let a = Alpha::new(0.3).unwrap();
        let s = StickSampler::new(LawSpec::gem(a, 1.0, 2).unwrap(), Pipeline::Gem).unwrap();
        let mut rng = RngState::new(1, 0);
        let d = s.draw_until(DEFAULT_EPSILON, 1 << 16, &mut rng).unwrap();
        assert!(d.remainder < DEFAULT_EPSILON);
        let err = s.draw_until(1e-300, 32, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn general_with_one_customer_records_unit_counts() {
        let a = Alpha::new(0.6).unwrap();
        let d = sticks_general(1, 1.3, a, 10, &mut RngState::new(0, 0)).unwrap();
        assert!(d.n.iter().all(|&k| k == 1));
    }
}
