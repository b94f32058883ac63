//! Positive stable density `f_α` with `E[e^{-λS_α}] = e^{-λ^α}`, and its
//! exponential/polynomial tilts.
//!
//! The density comes from Zolotarev's integral
//! `f_α(t) = α/((1-α)π t) ∫_0^π z A(u) e^{-z A(u)} du`, `z = t^{-α/(1-α)}`,
//! integrated adaptively. Far in the right tail (`t^{-α} ≤ 1/4`) the
//! convergent series `(1/π) Σ (-1)^{k+1} Γ(kα+1)/k! sin(kπα) t^{-kα-1}` is
//! used instead.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::density::integrate_log_coordinate;
use super::kernel::{ln_neg_moment, Kernel};
use crate::error::{domain, Result};
use crate::quad::{integrate, QuadConfig};
use crate::Alpha;

const SERIES_CUTOFF: f64 = 0.25;

fn ln_sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        // log(1 - x²/6 + x⁴/120)
        (-x2 / 6.0 + x2 * x2 / 120.0).ln_1p()
    } else {
        (x.sin() / x).ln()
    }
}

/// `log A(u)` for Zolotarev's function
/// `A(u) = [sin(αu)^α sin((1-α)u)^{1-α} / sin u]^{1/(1-α)}`.
pub(crate) fn ln_zolotarev_a(u: f64, a: f64) -> f64 {
    let b = 1.0 - a;
    let ln_sinc_u = if u > 0.5 * PI {
        (PI - u).sin().ln() - u.ln()
    } else {
        ln_sinc(u)
    };
    // sinc form cancels the powers of u exactly near 0
    let num = a * (a.ln() + ln_sinc(a * u)) + b * (b.ln() + ln_sinc(b * u));
    (num - ln_sinc_u) / b
}

/// Zolotarev-integral route for `log f_α(t)`.
pub(crate) fn stable_ln_pdf_integral(t: f64, a: f64, cfg: &QuadConfig) -> Result<f64> {
    let b = 1.0 - a;
    let ln_z = -(a / b) * t.ln();
    let z = ln_z.exp();
    let ln_a0 = ln_zolotarev_a(0.0, a);
    let a0 = ln_a0.exp();
    let za0 = z * a0;
    let integrand = |u: f64| {
        let la = ln_zolotarev_a(u, a);
        let za = (ln_z + la).exp();
        // z A e^{-z(A - A0)}
        (ln_z + la - (za - za0)).exp()
    };
    let value = if za0 < 1.0 {
        // split at the peak z A(u*) = 1
        let target = -ln_z;
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ln_zolotarev_a(mid, a) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let peak = 0.5 * (lo + hi);
        let left = integrate(integrand, 0.0, peak, cfg)?;
        let right = integrate(integrand, peak, PI, cfg)?;
        left.value + right.value
    } else {
        integrate(integrand, 0.0, PI, cfg)?.value
    };
    Ok((a / b).ln() - PI.ln() - t.ln() - za0 + value.ln())
}

/// Series route for `log f_α(t)`, valid for large `t`.
pub(crate) fn stable_ln_pdf_series(t: f64, a: f64) -> Option<f64> {
    let lx = -a * t.ln();
    let mut sum = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        let mag = (ln_gamma(kf * a + 1.0) - ln_gamma(kf + 1.0) + kf * lx).exp();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * mag * (kf * PI * a).sin();
        sum += term;
        if k > 2 && mag < 1e-18 * sum.abs() {
            break;
        }
    }
    if sum > 0.0 {
        Some(sum.ln() - PI.ln() - t.ln())
    } else {
        None
    }
}

/// `log f_α(t)` with an explicit quadrature configuration.
pub fn stable_ln_pdf_with(t: f64, alpha: Alpha, cfg: &QuadConfig) -> Result<f64> {
    if !(t > 0.0) || t.is_nan() {
        return domain(format!("stable density needs t > 0, got {t}"));
    }
    if t == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let a = alpha.get();
    if (-a * t.ln()).exp() <= SERIES_CUTOFF {
        if let Some(v) = stable_ln_pdf_series(t, a) {
            return Ok(v);
        }
    }
    stable_ln_pdf_integral(t, a, cfg)
}

/// `log f_α(t)` at relative quadrature tolerance `1e-12`.
pub fn stable_ln_pdf(t: f64, alpha: Alpha) -> Result<f64> {
    stable_ln_pdf_with(t, alpha, &QuadConfig::with_rel_tol(1e-12))
}

/// `f_α(t)`.
pub fn stable_pdf(t: f64, alpha: Alpha) -> Result<f64> {
    stable_ln_pdf(t, alpha).map(f64::exp)
}

/// Law of `S_{α,ρ}(λ)` with density `t^ρ e^{-λt} f_α(t) / E[S_α^ρ e^{-λS_α}]`.
/// The normalizer is computed once at construction.
#[derive(Debug, Clone)]
pub struct CondStableLaw {
    alpha: Alpha,
    lambda: f64,
    rho: f64,
    ln_norm: f64,
    quad: QuadConfig,
}

impl CondStableLaw {
    pub fn new(alpha: Alpha, lambda: f64, rho: f64) -> Result<Self> {
        Self::with_config(alpha, lambda, rho, QuadConfig::default())
    }

    pub fn with_config(alpha: Alpha, lambda: f64, rho: f64, quad: QuadConfig) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!("tilt rate must be finite and >= 0, got {lambda}"));
        }
        if !rho.is_finite() {
            return domain(format!("polynomial tilt must be finite, got {rho}"));
        }
        let a = alpha.get();
        let ln_norm = if lambda == 0.0 {
            if !(rho < a) {
                return domain(format!(
                    "lambda = 0 needs rho < alpha for integrability, got rho={rho}, alpha={a}"
                ));
            }
            // E[S^ρ] = E[S^{-θ}] with θ = -ρ
            ln_neg_moment(-rho, alpha)?
        } else if rho >= 0.0 && rho.fract() == 0.0 && rho <= 512.0 {
            let m = rho as usize;
            Kernel::new(alpha, m)?.ln_tilted_moment(m, lambda)?
        } else {
            let ln_g = |s: f64| {
                let t = s.exp();
                match stable_ln_pdf_with(t, alpha, &quad) {
                    Ok(lf) => (rho + 1.0) * s - lambda * t + lf,
                    Err(_) => f64::NAN,
                }
            };
            integrate_log_coordinate(&ln_g, &quad)?.0
        };
        Ok(CondStableLaw {
            alpha,
            lambda,
            rho,
            ln_norm,
            quad,
        })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `log E[S_α^ρ e^{-λS_α}]`.
    pub fn ln_normalizer(&self) -> f64 {
        self.ln_norm
    }

    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        let lf = stable_ln_pdf_with(t, self.alpha, &self.quad)?;
        if lf == f64::NEG_INFINITY {
            return Ok(lf);
        }
        Ok(self.rho * t.ln() - self.lambda * t + lf - self.ln_norm)
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.ln_pdf(t).map(f64::exp)
    }
}

/// Density of `S_{α,ρ}(λ)` at `t`, at the same tolerance as [`stable_pdf`].
pub fn cond_stable_pdf(t: f64, lambda: f64, rho: f64, alpha: Alpha) -> Result<f64> {
    CondStableLaw::with_config(alpha, lambda, rho, QuadConfig::with_rel_tol(1e-12))?.pdf(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_closed_form(t: f64) -> f64 {
        t.powf(-1.5) * (-1.0 / (4.0 * t)).exp() / (2.0 * PI.sqrt())
    }

    #[test]
    fn half_stable_matches_closed_form() {
        let h = Alpha::HALF;
        let v = stable_pdf(1.0, h).unwrap();
        assert!((v - 0.219_695_644_733_861).abs() < 1e-12, "{v}");
        for i in 0..200 {
            let t = 0.05 * (400.0f64).powf(i as f64 / 199.0);
            let got = stable_pdf(t, h).unwrap();
            let want = half_closed_form(t);
            assert!((got - want).abs() < 1e-10, "t={t} got={got} want={want}");
        }
    }

    #[test]
    fn series_and_integral_agree_near_cutoff() {
        for &a in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let t = (0.23f64).powf(-1.0 / a);
            let cfg = QuadConfig::with_rel_tol(1e-12);
            let i = stable_ln_pdf_integral(t, a, &cfg).unwrap();
            let s = stable_ln_pdf_series(t, a).unwrap();
            assert!((i - s).abs() < 1e-9, "a={a} t={t} {i} {s}");
        }
    }

    #[test]
    fn tiny_and_huge_arguments() {
        let a = Alpha::new(0.3).unwrap();
        let tiny = stable_pdf(1e-3, a).unwrap();
        assert!(tiny >= 0.0 && tiny.is_finite());
        let huge = stable_pdf(1e40, a).unwrap();
        assert!(huge > 0.0 && huge.is_finite());
        assert!(stable_pdf(0.0, a).is_err());
        assert!(stable_pdf(-1.0, a).is_err());
    }

    #[test]
    fn cond_stable_examples() {
        let h = Alpha::HALF;
        let v = cond_stable_pdf(1.0, 1.0, 0.0, h).unwrap();
        assert!((v - half_closed_form(1.0)).abs() < 1e-10);
        let a = Alpha::new(0.4).unwrap();
        for &t in &[0.1, 1.0, 7.0] {
            let plain = stable_pdf(t, a).unwrap();
            let tilted = cond_stable_pdf(t, 0.0, 0.0, a).unwrap();
            assert!((plain - tilted).abs() <= 1e-14 * plain);
        }
        assert!(cond_stable_pdf(1.0, 0.0, 0.5, a).is_err());
    }

    #[test]
    fn non_integer_normalizer_matches_closed_form_at_zero_tilt_limit() {
        // λ → 0⁺ with ρ = -0.7 < α: normalizer → Γ(1 + 0.7/α)/Γ(1.7)
        let a = Alpha::new(0.5).unwrap();
        let law = CondStableLaw::new(a, 1e-9, -0.7).unwrap();
        let exact = ln_neg_moment(0.7, a).unwrap();
        assert!(
            (law.ln_normalizer() - exact).abs() < 1e-6,
            "{} {}",
            law.ln_normalizer(),
            exact
        );
    }

    #[test]
    fn integer_normalizer_matches_quadrature() {
        let a = Alpha::new(0.7).unwrap();
        let law = CondStableLaw::new(a, 1.3, 2.0).unwrap();
        let quad = QuadConfig::default();
        let ln_g =
            |s: f64| 3.0 * s - 1.3 * s.exp() + stable_ln_pdf_with(s.exp(), a, &quad).unwrap();
        let (q, _) = integrate_log_coordinate(&ln_g, &quad).unwrap();
        assert!((law.ln_normalizer() - q).abs() < 1e-7);
    }
}
