//! Closed forms and exact computations that the suites compare against.
//! None of these go through the Stirling recurrence or the samplers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erf;
use statrs::function::factorial::ln_factorial;

use crate::error::{domain, Result};
use crate::quad::{integrate, QuadConfig};
use crate::specfun::kernel::ln_w_conditional_pdf_parts;
use crate::Alpha;

/// `S_α(m, k)` from the alternating sum
/// `(1/(α^k k!)) Σ_j (-1)^j C(k, j) (-jα)^{(m)}` in exact rationals, with
/// `α` taken as the exact value of the double.
pub fn stirling_exact(m: usize, k: usize, alpha: f64) -> BigRational {
    let a = BigRational::from_float(alpha).expect("finite alpha");
    let mut sum = BigRational::zero();
    let mut binom = BigInt::one();
    for j in 0..=k {
        let x = -(a.clone() * BigRational::from_integer(BigInt::from(j)));
        let mut rising = BigRational::one();
        for i in 0..m {
            rising *= x.clone() + BigRational::from_integer(BigInt::from(i));
        }
        let term = BigRational::from_integer(binom.clone()) * rising;
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    let mut denom = BigRational::one();
    for i in 1..=k {
        denom *= a.clone() * BigRational::from_integer(BigInt::from(i));
    }
    sum / denom
}

pub fn stirling_exact_f64(m: usize, k: usize, alpha: f64) -> f64 {
    stirling_exact(m, k, alpha).to_f64().unwrap_or(f64::NAN)
}

/// `(-1)^m d^m/dλ^m e^{-λ^α}` by the Faà di Bruno recursion
/// `F_n = Σ_k C(n-1, k) G_{k+1} F_{n-1-k}`, where
/// `G_j = α(1-α)(2-α)...(j-1-α) λ^{α-j}`; every term is positive.
pub fn laplace_derivative(m: usize, lambda: f64, alpha: f64) -> f64 {
    let mut g = vec![0.0; m + 1];
    let mut coef = alpha;
    for (j, gj) in g.iter_mut().enumerate().skip(1) {
        if j > 1 {
            coef *= (j - 1) as f64 - alpha;
        }
        *gj = coef * lambda.powf(alpha - j as f64);
    }
    let mut f = vec![0.0; m + 1];
    f[0] = (-lambda.powf(alpha)).exp();
    for n in 1..=m {
        let mut binom = 1.0;
        let mut s = 0.0;
        for k in 0..n {
            s += binom * g[k + 1] * f[n - 1 - k];
            binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
        }
        f[n] = s;
    }
    f[m]
}

/// Block-count pmf of the `(α, θ)` Chinese restaurant after `m` customers,
/// by forward recursion over arrivals. Index `k - 1` holds `P(K_m = k)`.
pub fn crp_block_pmf(m: usize, alpha: f64, theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    p[1] = 1.0;
    for i in 1..m {
        let mut next = vec![0.0; m + 1];
        for k in 1..=i {
            if p[k] == 0.0 {
                continue;
            }
            let new = (theta + k as f64 * alpha) / (theta + i as f64);
            next[k + 1] += p[k] * new;
            next[k] += p[k] * (1.0 - new);
        }
        p = next;
    }
    p.remove(0);
    p
}

/// `log K_{n+1/2}(z)` from the terminating series.
pub fn ln_bessel_k_half(n: usize, z: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..=n {
        let ln_t = ln_factorial((n + k) as u64)
            - ln_factorial(k as u64)
            - ln_factorial((n - k) as u64)
            - k as f64 * (2.0 * z).ln();
        sum += ln_t.exp();
    }
    0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z + sum.ln()
}

/// Log density of the half-stable law tilted by `t^m e^{-λt}`:
/// `t^{m-3/2} e^{-λt - 1/(4t)} / (2 (4λ)^{-p/2} K_p(√λ))`, `p = m - 1/2`.
pub fn gig_half_ln_pdf(t: f64, lambda: f64, m: usize) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let p = m as f64 - 0.5;
    let n = if m == 0 { 0 } else { m - 1 };
    let ln_norm = 2f64.ln() - 0.5 * p * (4.0 * lambda).ln() + ln_bessel_k_half(n, lambda.sqrt());
    (p - 1.0) * t.ln() - lambda * t - 0.25 / t - ln_norm
}

/// Cdf of `S_{1/2,0}(λ)`, an inverse Gaussian law with mean `1/(2√λ)` and
/// shape `1/2`.
pub fn inverse_gaussian_cdf(t: f64, lambda: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let nrm = Normal::new(0.0, 1.0).unwrap();
    let mu = 0.5 / lambda.sqrt();
    let shape = 0.5;
    let r = (shape / t).sqrt();
    let first = nrm.cdf(r * (t / mu - 1.0));
    let tail = nrm.cdf(-r * (t / mu + 1.0));
    let second = if tail > 0.0 {
        (2.0 * shape / mu + tail.ln()).exp()
    } else {
        0.0
    };
    (first + second).clamp(0.0, 1.0)
}

pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

/// `P(B²/(B² + s²) <= p)` for standard normal `B`.
pub fn first_half_stick_cdf(p: f64, s2: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        erf((s2 * p / (1.0 - p) / 2.0).sqrt())
    }
}

/// Cdf at `w` of the conditional stick density on `(r, 1)`, integrated with
/// substitutions that remove the algebraic singularities at `r` and `1`.
pub fn w_conditional_cdf(w: f64, r: f64, m: usize, alpha: Alpha, cfg: &QuadConfig) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("r must lie in (0, 1), got {r}"));
    }
    if w <= r {
        return Ok(0.0);
    }
    if w >= 1.0 {
        return Ok(1.0);
    }
    let a = alpha.get();
    let b = 1.0 - a;
    let pdf = |x: f64, lower: f64, upper: f64| {
        ln_w_conditional_pdf_parts(x, lower, upper, r, m, alpha)
            .map(f64::exp)
            .unwrap_or(0.0)
    };
    if w - r <= 1.0 - w {
        // x = r + u^{1/α}: dx = u^{1/α - 1}/α du
        let top = (w - r).powf(a);
        let f = |u: f64| {
            let lower = u.powf(1.0 / a);
            let x = r + lower;
            pdf(x, lower, (1.0 - r) - lower) * lower.powf(1.0 - a) / a
        };
        Ok(integrate(f, 0.0, top, cfg)?.value.clamp(0.0, 1.0))
    } else {
        // x = 1 - v^{1/(1-α)}: dx = -v^{1/(1-α) - 1}/(1-α) dv
        let top = (1.0 - w).powf(b);
        let f = |v: f64| {
            let upper = v.powf(1.0 / b);
            let x = 1.0 - upper;
            pdf(x, (1.0 - r) - upper, upper) * upper.powf(a) / b
        };
        Ok((1.0 - integrate(f, 0.0, top, cfg)?.value).clamp(0.0, 1.0))
    }
}
