//! Generalized Stirling numbers, `Ω_m` polynomials and the pmfs built on them.
//!
//! Everything is carried as natural logs. With `S_α(m, k)` the generalized
//! Stirling numbers, `Ω_m(x) = Σ_ℓ S_α(m, ℓ) (αx)^{ℓ-1}` for `m ≥ 1`, which
//! is the same as `Γ(m) Σ_ℓ P_α^{(m)}(ℓ) x^{ℓ-1} / Γ(ℓ)`.

use statrs::function::gamma::ln_gamma;

use super::{PmfTable, SpecConfig};
use crate::error::{domain, Error, Result};
use crate::logspace::{ln_binomial, log_add_exp, log_sum_exp};
use crate::Alpha;

/// Triangle of `log S_α(n, k)` for `0 ≤ n ≤ max_m`, built once and then
/// read-only, so a `Kernel` can be shared between threads.
#[derive(Debug, Clone)]
pub struct Kernel {
    alpha: Alpha,
    // rows[n][k] = log S_α(n, k), k = 0..=n
    rows: Vec<Vec<f64>>,
    config: SpecConfig,
}

impl Kernel {
    /// Builds the Stirling triangle up to row `max_m` with the default config.
    pub fn new(alpha: Alpha, max_m: usize) -> Result<Self> {
        Self::with_config(alpha, max_m, SpecConfig::default())
    }

    pub fn with_config(alpha: Alpha, max_m: usize, config: SpecConfig) -> Result<Self> {
        if max_m > config.max_m {
            return Err(Error::Capacity {
                m: max_m,
                cap: config.max_m,
            });
        }
        let a = alpha.get();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_m + 1);
        rows.push(vec![0.0]);
        if max_m >= 1 {
            rows.push(vec![f64::NEG_INFINITY, 0.0]);
        }
        // S(n+1, k) = S(n, k-1) + (n - kα) S(n, k)
        for n in 1..max_m {
            let prev = &rows[n];
            let mut next = vec![f64::NEG_INFINITY; n + 2];
            for (k, cell) in next.iter_mut().enumerate().skip(1) {
                let left = prev[k - 1];
                let stay = if k <= n {
                    (n as f64 - k as f64 * a).ln() + prev[k]
                } else {
                    f64::NEG_INFINITY
                };
                *cell = log_add_exp(left, stay);
            }
            rows.push(next);
        }
        Ok(Kernel {
            alpha,
            rows,
            config,
        })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn config(&self) -> &SpecConfig {
        &self.config
    }

    /// Largest `m` held in the table.
    pub fn max_m(&self) -> usize {
        self.rows.len() - 1
    }

    fn check_row(&self, m: usize) -> Result<()> {
        if m > self.config.max_m {
            return Err(Error::Capacity {
                m,
                cap: self.config.max_m,
            });
        }
        if m > self.max_m() {
            return Err(Error::Capacity {
                m,
                cap: self.max_m(),
            });
        }
        Ok(())
    }

    /// `log S_α(m, k)` for `1 ≤ k ≤ m`.
    pub fn ln_stirling(&self, m: usize, k: usize) -> Result<f64> {
        if m == 0 || k == 0 || k > m {
            return domain(format!(
                "generalized Stirling number needs 1 <= k <= m, got m={m}, k={k}"
            ));
        }
        self.check_row(m)?;
        Ok(self.rows[m][k])
    }

    /// Block-count pmf of a PD(α, 0) partition of `m` items.
    pub fn pd_block_pmf(&self, m: usize) -> Result<PmfTable> {
        if m == 0 {
            return domain("block-count pmf needs m >= 1");
        }
        self.check_row(m)?;
        let a = self.alpha.get();
        let lg_m = ln_gamma(m as f64);
        let logw = (1..=m)
            .map(|k| (k as f64 - 1.0) * a.ln() + ln_gamma(k as f64) + self.rows[m][k] - lg_m)
            .collect();
        PmfTable::from_log_weights(logw)
    }

    /// `log Ω_m(x)`. `x = 0` is allowed for `m ≥ 1` (continuity value).
    pub fn ln_omega(&self, m: usize, x: f64) -> Result<f64> {
        if !(x >= 0.0) || !x.is_finite() {
            return domain(format!("Omega needs a finite x >= 0, got {x}"));
        }
        let a = self.alpha.get();
        if m == 0 {
            if x == 0.0 {
                return domain("Omega_0 is undefined at x = 0");
            }
            return Ok(-a.ln() - x.ln());
        }
        self.check_row(m)?;
        if x == 0.0 {
            return Ok(self.rows[m][1]);
        }
        let lax = (a * x).ln();
        let terms: Vec<f64> = (1..=m)
            .map(|l| self.rows[m][l] + (l as f64 - 1.0) * lax)
            .collect();
        Ok(log_sum_exp(&terms))
    }

    pub fn omega(&self, m: usize, x: f64) -> Result<f64> {
        self.ln_omega(m, x).map(f64::exp)
    }

    /// `log E[S_α^m e^{-λ S_α}]`.
    pub fn ln_tilted_moment(&self, m: usize, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return domain(format!("tilted moment needs lambda > 0, got {lambda}"));
        }
        let a = self.alpha.get();
        let x = lambda.powf(a);
        if m == 0 {
            return Ok(-x);
        }
        Ok(a.ln() - x + (a - m as f64) * lambda.ln() + self.ln_omega(m, x)?)
    }

    pub fn tilted_moment(&self, m: usize, lambda: f64) -> Result<f64> {
        self.ln_tilted_moment(m, lambda).map(f64::exp)
    }

    /// Pmf of `K_m(λ)`, the block count given `N_{S_α}(λ) = m`:
    /// proportional to `S_α(m, k) (αλ^α)^{k-1}`.
    pub fn block_pmf_conditional(&self, m: usize, lambda: f64) -> Result<PmfTable> {
        if m == 0 {
            return domain("conditional block-count pmf needs m >= 1");
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return domain(format!(
                "conditional block-count pmf needs lambda > 0, got {lambda}"
            ));
        }
        self.check_row(m)?;
        let a = self.alpha.get();
        let lax = a.ln() + a * lambda.ln();
        let logw = (1..=m)
            .map(|k| self.rows[m][k] + (k as f64 - 1.0) * lax)
            .collect();
        PmfTable::from_log_weights(logw)
    }

    /// Marginal pmf `q_{k,m}(λ)` of the mixture index `N` on the first stick.
    pub fn n_marginal_pmf(&self, m: usize, lambda: f64) -> Result<PmfTable> {
        PmfTable::from_log_weights(self.ln_n_marginal_terms(m, lambda)?)
    }

    /// Unnormalized `log q_{k,m}(λ)`, `k = 1..m`. These already sum to one in
    /// exact arithmetic.
    pub fn ln_n_marginal_terms(&self, m: usize, lambda: f64) -> Result<Vec<f64>> {
        if m == 0 {
            return domain("mixture-index pmf needs m >= 1");
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return domain(format!("mixture-index pmf needs lambda > 0, got {lambda}"));
        }
        self.check_row(m)?;
        let a = self.alpha.get();
        let x = lambda.powf(a);
        let ln_om = self.ln_omega(m, x)?;
        let lg1a = ln_gamma(1.0 - a);
        (1..=m)
            .map(|k| {
                Ok(ln_gamma(k as f64 - a) - lg1a
                    + ln_binomial(m - 1, k - 1)
                    + self.ln_omega(m - k, x)?
                    + a.ln()
                    + x.ln()
                    - ln_om)
            })
            .collect()
    }

    /// Density of `Y_{m,m-k}(λ)/λ` at `y > 0`.
    pub fn ln_y_pdf(&self, y: f64, lambda: f64, m: usize, k: usize) -> Result<f64> {
        check_mk(m, k)?;
        if !(lambda > 0.0) {
            return domain(format!("Y density needs lambda > 0, got {lambda}"));
        }
        if !(y > 0.0) {
            return domain(format!("Y density needs y > 0, got {y}"));
        }
        if y == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let a = self.alpha.get();
        let x = lambda.powf(a);
        let l1y = y.ln_1p();
        // (1+y)^α - 1
        let grow = (a * l1y).exp_m1();
        Ok(
            self.ln_omega(m, x * (a * l1y).exp())?
                - ln_gamma(k as f64)
                - self.ln_omega(m - k, x)?
                + (k as f64 - 1.0) * y.ln()
                + (a - m as f64) * l1y
                - x * grow,
        )
    }

    /// `log f_{m,k}(r | λ)`; `one_minus_r` lets callers pass `1 - r` exactly.
    pub fn ln_r1m_pdf_parts(
        &self,
        r: f64,
        one_minus_r: f64,
        lambda: f64,
        m: usize,
        k: usize,
    ) -> Result<f64> {
        check_mk(m, k)?;
        if !(lambda > 0.0) {
            return domain(format!("R density needs lambda > 0, got {lambda}"));
        }
        if !(r > 0.0 && r < 1.0) {
            return domain(format!("R density needs 0 < r < 1, got {r}"));
        }
        let a = self.alpha.get();
        let x = lambda.powf(a);
        let lr = r.ln();
        // r^{-α} - 1
        let grow = (-a * lr).exp_m1();
        Ok(
            self.ln_omega(m, x * (-a * lr).exp())?
                - ln_gamma(k as f64)
                - self.ln_omega(m - k, x)?
                + (k as f64 - 1.0) * one_minus_r.ln()
                + (m as f64 - k as f64 - a - 1.0) * lr
                - x * grow,
        )
    }

    /// Marginal density `f_m(r | λ)` of the first `R` variable.
    pub fn ln_r_marginal_pdf(&self, r: f64, lambda: f64, m: usize) -> Result<f64> {
        if m == 0 {
            return domain("R marginal density needs m >= 1");
        }
        let a = self.alpha.get();
        let x = lambda.powf(a);
        Ok(self.ln_omega(m, x * r.powf(-a))? - self.ln_omega(m, x)?
            + ln_beta_shift_moment(m - 1, r, self.alpha)?
            + ln_r1_pdf(r, lambda, self.alpha)?)
    }
}

fn check_mk(m: usize, k: usize) -> Result<()> {
    if m == 0 || k == 0 || k > m {
        return domain(format!("need 1 <= k <= m, got m={m}, k={k}"));
    }
    Ok(())
}

/// `log f_{R_1}(r | λ)`, the density of the first `R` variable.
pub fn ln_r1_pdf(r: f64, lambda: f64, alpha: Alpha) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("R density needs 0 < r < 1, got {r}"));
    }
    if !(lambda > 0.0) {
        return domain(format!("R density needs lambda > 0, got {lambda}"));
    }
    let a = alpha.get();
    let x = lambda.powf(a);
    let lr = r.ln();
    Ok(a.ln() + x.ln() - x * (-a * lr).exp_m1() - (a + 1.0) * lr)
}

/// `log E[(β(1-r) + r)^p]` for `β ~ Beta(1-α, α)`, from the binomial
/// expansion with beta moments `E[β^j] = Π_{i<j} (1-α+i)/(1+i)`.
pub fn ln_beta_shift_moment(p: usize, r: f64, alpha: Alpha) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("need 0 < r < 1, got {r}"));
    }
    let a = alpha.get();
    let (lr, l1r) = (r.ln(), (-r).ln_1p());
    let mut ln_mu = 0.0;
    let mut terms = Vec::with_capacity(p + 1);
    for j in 0..=p {
        if j > 0 {
            ln_mu += ((1.0 - a + (j - 1) as f64) / j as f64).ln();
        }
        terms.push(ln_binomial(p, j) + ln_mu + j as f64 * l1r + (p - j) as f64 * lr);
    }
    Ok(log_sum_exp(&terms))
}

/// `q_m(k | r)`, the pmf of the mixture index given `R = r`; independent of
/// `λ`. The normalizer is computed twice (sum of gamma-function terms and the
/// beta-moment expansion) and the two must agree to `1e-10`.
pub fn n_conditional_pmf(m: usize, r: f64, alpha: Alpha) -> Result<PmfTable> {
    if m == 0 {
        return domain("conditional mixture-index pmf needs m >= 1");
    }
    if !(r > 0.0 && r < 1.0) {
        return domain(format!(
            "conditional mixture-index pmf needs 0 < r < 1, got {r}"
        ));
    }
    let a = alpha.get();
    let (lr, l1r) = (r.ln(), (-r).ln_1p());
    let lg1a = ln_gamma(1.0 - a);
    let terms: Vec<f64> = (1..=m)
        .map(|k| {
            ln_gamma(k as f64 - a) - ln_gamma(k as f64) - lg1a
                + ln_binomial(m - 1, k - 1)
                + (k - 1) as f64 * l1r
                + (m - k) as f64 * lr
        })
        .collect();
    let direct = log_sum_exp(&terms);
    let expansion = ln_beta_shift_moment(m - 1, r, alpha)?;
    let gap = (direct - expansion).exp_m1().abs();
    if gap > 1e-10 {
        return Err(Error::Numeric {
            message: format!("normalizer routes disagree for m={m}, r={r}"),
            achieved_error: gap,
        });
    }
    PmfTable::from_log_weights(terms)
}

/// `log B_{m,α}(w | r)` with `w - r` and `1 - w` supplied separately so that
/// callers near either endpoint keep full precision.
pub fn ln_w_conditional_pdf_parts(
    w: f64,
    w_minus_r: f64,
    one_minus_w: f64,
    r: f64,
    m: usize,
    alpha: Alpha,
) -> Result<f64> {
    if m == 0 {
        return domain("conditional W density needs m >= 1");
    }
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("conditional W density needs 0 < r < 1, got {r}"));
    }
    if !(w_minus_r > 0.0 && one_minus_w > 0.0) {
        return domain(format!(
            "conditional W density needs r < w < 1, got w={w}, r={r}"
        ));
    }
    let a = alpha.get();
    Ok(
        -ln_gamma(1.0 - a) - ln_gamma(a) - m as f64 * w.ln() - a * one_minus_w.ln()
            + (a - 1.0) * w_minus_r.ln()
            + (m as f64 - a) * r.ln()
            - ln_beta_shift_moment(m - 1, r, alpha)?,
    )
}

/// `E[S_α^{-θ}] = Γ(θ/α + 1) / Γ(θ + 1)` for `θ > -α`.
pub fn neg_moment(theta: f64, alpha: Alpha) -> Result<f64> {
    ln_neg_moment(theta, alpha).map(f64::exp)
}

pub fn ln_neg_moment(theta: f64, alpha: Alpha) -> Result<f64> {
    let a = alpha.get();
    if !(theta > -a) || !theta.is_finite() {
        return domain(format!(
            "negative moment needs theta > -alpha, got theta={theta}"
        ));
    }
    Ok(ln_gamma(theta / a + 1.0) - ln_gamma(theta + 1.0))
}

/// Convenience wrappers that build a table sized for the call.
pub fn gen_stirling_log(m: usize, k: usize, alpha: Alpha) -> Result<f64> {
    cap(m)?;
    Kernel::new(alpha, m)?.ln_stirling(m, k)
}

pub fn pd_block_pmf(m: usize, alpha: Alpha) -> Result<PmfTable> {
    cap(m)?;
    Kernel::new(alpha, m)?.pd_block_pmf(m)
}

pub fn omega(m: usize, x: f64, alpha: Alpha) -> Result<f64> {
    cap(m)?;
    Kernel::new(alpha, m)?.omega(m, x)
}

pub fn tilted_moment(m: usize, lambda: f64, alpha: Alpha) -> Result<f64> {
    cap(m)?;
    Kernel::new(alpha, m)?.tilted_moment(m, lambda)
}

pub fn block_pmf_conditional(m: usize, lambda: f64, alpha: Alpha) -> Result<PmfTable> {
    cap(m)?;
    Kernel::new(alpha, m)?.block_pmf_conditional(m, lambda)
}

pub fn n_marginal_pmf(m: usize, lambda: f64, alpha: Alpha) -> Result<PmfTable> {
    cap(m)?;
    Kernel::new(alpha, m)?.n_marginal_pmf(m, lambda)
}

pub fn y_pdf(y: f64, lambda: f64, m: usize, k: usize, alpha: Alpha) -> Result<f64> {
    cap(m)?;
    Kernel::new(alpha, m)?
        .ln_y_pdf(y, lambda, m, k)
        .map(f64::exp)
}

pub fn r1m_pdf(r: f64, lambda: f64, m: usize, k: usize, alpha: Alpha) -> Result<f64> {
    cap(m)?;
    Kernel::new(alpha, m)?
        .ln_r1m_pdf_parts(r, 1.0 - r, lambda, m, k)
        .map(f64::exp)
}

pub fn w_conditional_pdf(w: f64, r: f64, m: usize, alpha: Alpha) -> Result<f64> {
    if !(r > 0.0 && r < w && w < 1.0) {
        return domain(format!(
            "conditional W density needs 0 < r < w < 1, got w={w}, r={r}"
        ));
    }
    ln_w_conditional_pdf_parts(w, w - r, 1.0 - w, r, m, alpha).map(f64::exp)
}

fn cap(m: usize) -> Result<()> {
    let cap = SpecConfig::default().max_m;
    if m > cap {
        Err(Error::Capacity { m, cap })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn al(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    #[test]
    fn stirling_small_cases() {
        assert_eq!(gen_stirling_log(1, 1, al(0.37)).unwrap(), 0.0);
        assert_relative_eq!(
            gen_stirling_log(2, 1, al(0.5)).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            gen_stirling_log(3, 2, al(0.5)).unwrap(),
            1.5f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn stirling_errors() {
        assert!(matches!(
            gen_stirling_log(3, 0, al(0.5)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gen_stirling_log(3, 4, al(0.5)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gen_stirling_log(513, 1, al(0.5)),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn stirling_at_cap_is_finite() {
        let k = Kernel::new(al(0.9), 512).unwrap();
        for j in 1..=512 {
            assert!(k.ln_stirling(512, j).unwrap().is_finite());
        }
        let pmf = k.pd_block_pmf(512).unwrap();
        assert!((pmf.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_pmfs() {
        let p = pd_block_pmf(1, al(0.3)).unwrap();
        assert_eq!(p.probs(), vec![1.0]);
        let p = pd_block_pmf(2, al(0.5)).unwrap();
        assert_relative_eq!(p.prob(1), 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.prob(2), 0.5, epsilon = 1e-15);
        let c = block_pmf_conditional(2, 1.0, al(0.5)).unwrap();
        assert_relative_eq!(c.prob(1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn omega_values() {
        let a = al(0.5);
        assert_relative_eq!(omega(1, 3.7, a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(omega(0, 2.0, a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(omega(2, 1.0, a).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(omega(0, 0.0, a), Err(Error::Domain(_))));
        // continuity value Γ(m) P(1) = S(m, 1)
        let k = Kernel::new(a, 4).unwrap();
        assert_relative_eq!(
            k.omega(4, 0.0).unwrap(),
            k.omega(4, 1e-14).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn tilted_moment_values() {
        let a = al(0.5);
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(tilted_moment(0, 1.0, a).unwrap(), e1, max_relative = 1e-15);
        assert_relative_eq!(
            tilted_moment(1, 1.0, a).unwrap(),
            0.5 * e1,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            tilted_moment(2, 1.0, a).unwrap(),
            0.5 * e1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn mixture_index_pmfs() {
        let q = n_marginal_pmf(2, 1.0, al(0.5)).unwrap();
        assert_relative_eq!(q.prob(1), 0.5, epsilon = 1e-14);
        assert_relative_eq!(q.prob(2), 0.5, epsilon = 1e-14);
        assert_eq!(n_marginal_pmf(1, 0.3, al(0.4)).unwrap().probs(), vec![1.0]);
        let q = n_marginal_pmf(4, 0.7, al(0.6)).unwrap();
        assert!((q.total() - 1.0).abs() < 1e-12);

        let c = n_conditional_pmf(2, 0.5, al(0.5)).unwrap();
        assert_relative_eq!(c.prob(1), 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(c.prob(2), 1.0 / 3.0, epsilon = 1e-14);
        assert!(matches!(
            n_conditional_pmf(2, 1.0, al(0.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn marginal_terms_are_self_normalized() {
        for &(m, lam, a) in &[
            (4, 0.7, 0.6),
            (5, 2.0, 0.3),
            (12, 0.1, 0.8),
            (40, 30.0, 0.5),
        ] {
            let k = Kernel::new(al(a), m).unwrap();
            let t = k.ln_n_marginal_terms(m, lam).unwrap();
            assert!(log_sum_exp(&t).abs() < 1e-11, "m={m} lam={lam} a={a}");
        }
    }

    #[test]
    fn neg_moment_values() {
        assert_relative_eq!(neg_moment(0.0, al(0.3)).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(neg_moment(1.0, al(0.5)).unwrap(), 2.0, max_relative = 1e-13);
        assert_relative_eq!(
            neg_moment(0.5, al(0.5)).unwrap(),
            std::f64::consts::FRAC_2_SQRT_PI,
            max_relative = 1e-13
        );
        assert!(neg_moment(-0.5, al(0.5)).is_err());
    }

    #[test]
    fn w_conditional_domain() {
        assert!(w_conditional_pdf(0.3, 0.4, 2, al(0.5)).is_err());
        assert!(w_conditional_pdf(1.0, 0.4, 2, al(0.5)).is_err());
        assert!(w_conditional_pdf(0.6, 0.4, 2, al(0.5)).unwrap() > 0.0);
    }

    #[test]
    fn y_survival_closed_form_value() {
        // P(Y_{1,0}(1)/1 > 1) = exp(-(2^0.5 - 1)) for α = 1/2
        let v = (-(2f64.sqrt() - 1.0)).exp();
        assert_relative_eq!(v, 0.660_859_801_406_828, max_relative = 1e-14);
    }
}
