//! Exact generators for the random objects behind the stick-breaking
//! pipelines. Every generator takes an explicit [`RngState`].

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specfun::kernel::Kernel;
use crate::specfun::stable::ln_zolotarev_a;
use crate::Alpha;

/// Default switch point, in `λ^α`, from plain rejection to double rejection.
pub const DEFAULT_TILT_THRESHOLD: f64 = 3.0;

/// Shapes below this are treated as a point mass at zero.
const GAMMA_ZERO_SHAPE: f64 = 1e-12;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Position of an [`RngState`], enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
    /// Number of 32-bit words already consumed.
    pub word_pos: u64,
}

/// Counter-based generator addressed by `(seed, stream)`.
///
/// Identical `(seed, stream)` pairs give identical sequences on every
/// platform; [`RngState::child`] derives independent streams for parallel
/// work without coordination.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn snapshot(&self) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.inner.get_word_pos() as u64,
        }
    }

    pub fn restore(snap: RngSeed) -> Self {
        let mut s = RngState::new(snap.seed, snap.stream);
        s.inner.set_word_pos(snap.word_pos as u128);
        s
    }

    /// Independent stream number `index` below this one. Does not advance
    /// `self`.
    pub fn child(&self, index: u64) -> RngState {
        let stream = splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_f42d)));
        RngState::new(self.seed, stream)
    }
}

impl RngState {
    /// Uniform on the open interval `(0, 1)`.
    pub fn random_open01(&mut self) -> f64 {
        Open01.sample(self)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    pub fn standard_exp(&mut self) -> f64 {
        Exp1.sample(self)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn uniform_open(rng: &mut RngState) -> f64 {
    Open01.sample(rng)
}

fn exp1(rng: &mut RngState) -> f64 {
    Exp1.sample(rng)
}

fn normal(rng: &mut RngState) -> f64 {
    StandardNormal.sample(rng)
}

/// `Gamma(shape, 1)`; shapes below `1e-12` give exactly 0.
pub fn sample_gamma(shape: f64, rng: &mut RngState) -> f64 {
    if shape < GAMMA_ZERO_SHAPE {
        return 0.0;
    }
    Gamma::new(shape, 1.0)
        .expect("positive finite shape")
        .sample(rng)
}

/// `(β, 1 - β)` for `β ~ Beta(a, b)`, both computed without cancellation.
pub fn sample_beta_pair(a: f64, b: f64, rng: &mut RngState) -> (f64, f64) {
    loop {
        let x = sample_gamma(a, rng);
        let y = sample_gamma(b, rng);
        let s = x + y;
        if x > 0.0 && y > 0.0 && s.is_finite() {
            return (x / s, y / s);
        }
    }
}

/// `S_α` with `E[e^{-λS_α}] = e^{-λ^α}`, by Kanter's representation
/// `(A(U)/E)^{(1-α)/α}`.
pub fn sample_stable(alpha: Alpha, rng: &mut RngState) -> f64 {
    let a = alpha.get();
    loop {
        let u = PI * uniform_open(rng);
        let e = exp1(rng);
        let s = ((1.0 - a) / a * (ln_zolotarev_a(u, a) - e.ln())).exp();
        if s > 0.0 && s.is_finite() {
            return s;
        }
    }
}

/// `S_{α,0}(λ)`: density `e^{λ^α} e^{-λt} f_α(t)`.
pub fn sample_tilted_stable(alpha: Alpha, lambda: f64, rng: &mut RngState) -> f64 {
    sample_tilted_stable_with(alpha, lambda, DEFAULT_TILT_THRESHOLD, rng)
}

/// As [`sample_tilted_stable`] with an explicit `λ^α` switch point.
pub fn sample_tilted_stable_with(
    alpha: Alpha,
    lambda: f64,
    threshold: f64,
    rng: &mut RngState,
) -> f64 {
    if lambda == 0.0 {
        return sample_stable(alpha, rng);
    }
    if lambda.powf(alpha.get()) <= threshold {
        loop {
            let s = sample_stable(alpha, rng);
            if exp1(rng) > lambda * s {
                return s;
            }
        }
    }
    double_rejection(alpha.get(), lambda, rng)
}

/// Devroye's double-rejection generator for exponentially tilted stable laws.
fn double_rejection(a: f64, lambda: f64, rng: &mut RngState) -> f64 {
    let x_tilt = lambda.powf(a);
    let b = (1.0 - a) / a;
    let gamma = x_tilt * a * (1.0 - a);
    let sgamma = gamma.sqrt();
    let c1 = (PI / 2.0).sqrt();
    let c2 = 2.0 + c1;
    let c3 = c2 * sgamma;
    let xi = (1.0 + std::f64::consts::SQRT_2 * c3) / PI;
    let psi = c3 * (-gamma * PI * PI / 8.0).exp() / PI.sqrt();
    let w1 = c1 * xi / sgamma;
    let w2 = 2.0 * PI.sqrt() * psi;
    let w3 = xi * PI;
    let ln_a0 = ln_zolotarev_a(0.0, a);
    loop {
        let (u, z, zz) = loop {
            let v: f64 = rng.random();
            let u = if gamma >= 1.0 {
                if v < w1 / (w1 + w2) {
                    normal(rng).abs() / sgamma
                } else {
                    let w: f64 = rng.random();
                    PI * (1.0 - w * w)
                }
            } else {
                let w: f64 = rng.random();
                if v < w3 / (w3 + w2) {
                    PI * w
                } else {
                    PI * (1.0 - w * w)
                }
            };
            let w: f64 = rng.random();
            if !(u < PI) {
                continue;
            }
            // B(u)/B(0) = (A(0)/A(u))^{1-α}
            let zeta = ((1.0 - a) * (ln_a0 - ln_zolotarev_a(u, a))).exp().sqrt();
            let z = 1.0 / (1.0 - (1.0 + a * zeta / sgamma).powf(-1.0 / a));
            let mut rho = PI * (-x_tilt * (1.0 - 1.0 / (zeta * zeta))).exp()
                / ((1.0 + c1) * sgamma / zeta + z);
            let mut d = 0.0;
            if gamma >= 1.0 {
                d += xi * (-gamma * u * u / 2.0).exp();
            }
            if u > 0.0 {
                d += psi / (PI - u).sqrt();
            }
            if gamma < 1.0 {
                d += xi;
            }
            rho *= d;
            let zz = w * rho;
            if zz <= 1.0 {
                break (u, z, zz);
            }
        };
        let aa = ln_zolotarev_a(u, a).exp();
        let m = (b / aa).powf(a) * x_tilt;
        let delta = (m * a / aa).sqrt();
        let a1 = delta * c1;
        let a3 = z / aa;
        let s = a1 + delta + a3;
        let v: f64 = rng.random();
        let (x, penalty) = if v < a1 / s {
            let n = normal(rng);
            (m - delta * n.abs(), n * n / 2.0)
        } else if v < (a1 + delta) / s {
            let w: f64 = rng.random();
            (m + delta * w, 0.0)
        } else {
            let e = exp1(rng);
            (m + delta + e * a3, e)
        };
        if x < 0.0 {
            continue;
        }
        let e = -zz.ln();
        // λ(X^{-b} - m^{-b}) written to avoid overflow for small α
        let c =
            aa * (x - m) + (x_tilt.ln() / a - b * m.ln()).exp() * ((m / x).powf(b) - 1.0) - penalty;
        if c <= e {
            return (-b * x.ln()).exp();
        }
    }
}

/// Same draw carried with its law parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSample {
    pub value: f64,
    pub tilt_rate: f64,
    pub poly_order: f64,
    pub alpha: Alpha,
}

/// Generators that share a Stirling table for counts up to `max_m`.
#[derive(Debug, Clone)]
pub struct CondSampler {
    kernel: Kernel,
    tilt_threshold: f64,
}

impl CondSampler {
    pub fn new(alpha: Alpha, max_m: usize) -> Result<Self> {
        Ok(CondSampler {
            kernel: Kernel::new(alpha, max_m.max(1))?,
            tilt_threshold: DEFAULT_TILT_THRESHOLD,
        })
    }

    pub fn with_tilt_threshold(mut self, threshold: f64) -> Self {
        self.tilt_threshold = threshold;
        self
    }

    pub fn alpha(&self) -> Alpha {
        self.kernel.alpha()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn tilted_stable(&self, lambda: f64, rng: &mut RngState) -> f64 {
        sample_tilted_stable_with(self.alpha(), lambda, self.tilt_threshold, rng)
    }

    /// `K_m(λ)`.
    pub fn block_count(&self, m: usize, lambda: f64, rng: &mut RngState) -> Result<usize> {
        let pmf = self.kernel.block_pmf_conditional(m, lambda)?;
        Ok(pmf.quantile(uniform_open(rng)))
    }

    /// `S_{α,m}(λ) = (τ_α(λ^α) + G_{m - K_m(λ)α}) / λ`.
    pub fn cond_stable(&self, m: usize, lambda: f64, rng: &mut RngState) -> Result<f64> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!(
                "conditioned stable draw needs lambda > 0, got {lambda}"
            ));
        }
        if m == 0 {
            return Ok(self.tilted_stable(lambda, rng));
        }
        let k = self.block_count(m, lambda, rng)?;
        let tau = lambda * self.tilted_stable(lambda, rng);
        let g = sample_gamma(m as f64 - k as f64 * self.alpha().get(), rng);
        Ok((tau + g) / lambda)
    }

    pub fn cond_stable_sample(
        &self,
        m: usize,
        lambda: f64,
        rng: &mut RngState,
    ) -> Result<SubordinatorSample> {
        Ok(SubordinatorSample {
            value: self.cond_stable(m, lambda, rng)?,
            tilt_rate: lambda,
            poly_order: m as f64,
            alpha: self.alpha(),
        })
    }

    /// `Y_{m,ℓ}(x) = G_{m-ℓ} / S_{α,ℓ}(x)`.
    pub fn y(&self, m: usize, ell: usize, x: f64, rng: &mut RngState) -> Result<f64> {
        if ell >= m {
            return domain(format!("Y needs 0 <= ell < m, got ell = {ell}, m = {m}"));
        }
        let g = sample_gamma((m - ell) as f64, rng);
        let s = self.cond_stable(ell, x, rng)?;
        Ok(g / s)
    }
}

/// `K_m(λ)` under `PD(α,0)` conditioned on the count.
pub fn sample_block_count_conditional(
    m: usize,
    lambda: f64,
    alpha: Alpha,
    rng: &mut RngState,
) -> Result<usize> {
    CondSampler::new(alpha, m)?.block_count(m, lambda, rng)
}

/// `S_{α,m}(λ)`.
pub fn sample_cond_stable(m: usize, lambda: f64, alpha: Alpha, rng: &mut RngState) -> Result<f64> {
    CondSampler::new(alpha, m)?.cond_stable(m, lambda, rng)
}

/// `Y_{m,ℓ}(x)`.
#[allow(non_snake_case)]
pub fn sample_Y(m: usize, ell: usize, x: f64, alpha: Alpha, rng: &mut RngState) -> Result<f64> {
    CondSampler::new(alpha, m)?.y(m, ell, x, rng)
}

/// Successive `R_k = ((G̃_{k-1} + λ^α)/(G̃_k + λ^α))^{1/α}` with their
/// complements, one step at a time.
#[derive(Debug, Clone)]
pub struct RStepper {
    inv_alpha: f64,
    x: f64,
    g: f64,
}

/// One step of an [`RStepper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RStep {
    pub r: f64,
    pub one_minus_r: f64,
    /// `G̃_k`.
    pub gtilde: f64,
}

impl RStepper {
    pub fn new(lambda: f64, alpha: Alpha) -> Self {
        RStepper {
            inv_alpha: 1.0 / alpha.get(),
            x: lambda.powf(alpha.get()),
            g: 0.0,
        }
    }

    /// `λ^α`.
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn step(&mut self, rng: &mut RngState) -> RStep {
        let e = exp1(rng);
        let prev = self.g + self.x;
        self.g += e;
        let next = self.g + self.x;
        let frac = e / next;
        // ln_1p(-frac) loses the relative accuracy of 1 - frac as frac -> 1
        let ln_ratio = if frac < 0.5 {
            (-frac).ln_1p()
        } else {
            prev.ln() - next.ln()
        };
        let ln_r = self.inv_alpha * ln_ratio;
        RStep {
            r: ln_r.exp(),
            one_minus_r: -ln_r.exp_m1(),
            gtilde: self.g,
        }
    }
}

/// `n` residual fractions with the cumulative exponentials behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct RSequence {
    pub r: Vec<f64>,
    pub one_minus_r: Vec<f64>,
    pub gtilde: Vec<f64>,
}

#[allow(non_snake_case)]
pub fn sample_R_sequence(n: usize, lambda: f64, alpha: Alpha, rng: &mut RngState) -> RSequence {
    let mut st = RStepper::new(lambda, alpha);
    let mut out = RSequence {
        r: Vec::with_capacity(n),
        one_minus_r: Vec::with_capacity(n),
        gtilde: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let s = st.step(rng);
        out.r.push(s.r);
        out.one_minus_r.push(s.one_minus_r);
        out.gtilde.push(s.gtilde);
    }
    out
}

/// Number of tables after seating `m` customers in the `(α, θ)` Chinese
/// restaurant.
pub fn sample_crp_block_count(
    m: usize,
    alpha: Alpha,
    theta: f64,
    rng: &mut RngState,
) -> Result<usize> {
    let a = alpha.get();
    if !(theta > -a) {
        return domain(format!("CRP needs theta > -alpha, got {theta}"));
    }
    if m == 0 {
        return domain("CRP needs at least one customer");
    }
    let mut k = 1usize;
    for i in 1..m {
        let u: f64 = rng.random();
        if u < (theta + k as f64 * a) / (theta + i as f64) {
            k += 1;
        }
    }
    Ok(k)
}

/// Rate `λ` whose mixing turns the conditioned law into `PD(α, θ)`:
/// `G_{θ/α + K_m}^{1/α}` with `K_m` from the `(α, θ)` restaurant.
pub fn sample_gem_lambda(m: usize, theta: f64, alpha: Alpha, rng: &mut RngState) -> Result<f64> {
    let a = alpha.get();
    if !(theta > -a) {
        return domain(format!("GEM mixing needs theta > -alpha, got {theta}"));
    }
    let shape = match m {
        0 => {
            if !(theta > 0.0) {
                return domain(format!(
                    "GEM mixing with m = 0 needs theta > 0, got {theta}"
                ));
            }
            theta / a
        }
        1 => (theta + a) / a,
        _ => theta / a + sample_crp_block_count(m, alpha, theta, rng)? as f64,
    };
    Ok(sample_gamma(shape, rng).powf(1.0 / a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn same_stream_same_draws() {
        let mut a = RngState::new(9, 4);
        let mut b = RngState::new(9, 4);
        let al = Alpha::new(0.4).unwrap();
        for _ in 0..100 {
            assert_eq!(
                sample_tilted_stable(al, 20.0, &mut a).to_bits(),
                sample_tilted_stable(al, 20.0, &mut b).to_bits()
            );
        }
        assert_ne!(
            RngState::new(9, 4).next_u64(),
            RngState::new(9, 5).next_u64()
        );
    }

    #[test]
    fn snapshot_resumes() {
        let mut a = RngState::new(1, 2);
        a.next_u64();
        a.next_u32();
        let snap = a.snapshot();
        let mut b = RngState::restore(snap);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn zero_tilt_is_plain_stable() {
        let al = Alpha::new(0.6).unwrap();
        let mut a = RngState::new(3, 0);
        let mut b = RngState::new(3, 0);
        for _ in 0..50 {
            assert_eq!(
                sample_tilted_stable(al, 0.0, &mut a),
                sample_stable(al, &mut b)
            );
        }
    }

    #[test]
    fn stable_laplace_transform() {
        let al = Alpha::new(0.3).unwrap();
        let mut rng = RngState::new(11, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| (-sample_stable(al, &mut rng)).exp())
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - (-1f64).exp()).abs() < 4.0 * se, "{m} {se}");
    }

    #[test]
    fn tilted_laplace_transform_both_regimes() {
        for &(a, lambda) in &[
            (0.5, 2.0),
            (0.5, 30.0),
            (0.2, 500.0),
            (0.8, 8.0),
            (0.9, 40.0),
        ] {
            let al = Alpha::new(a).unwrap();
            let mut rng = RngState::new(5, 1);
            let s = 1.0;
            let xs: Vec<f64> = (0..100_000)
                .map(|_| (-s * sample_tilted_stable(al, lambda, &mut rng)).exp())
                .collect();
            let (m, se) = mean_se(&xs);
            let target = (lambda.powf(a) - (lambda + s).powf(a)).exp();
            assert!(
                (m - target).abs() < 4.0 * se,
                "a={a} l={lambda}: {m} vs {target} ({se})"
            );
        }
    }

    #[test]
    fn tilted_mean_in_double_rejection_regime() {
        // E[S_{α,0}(λ)] = αλ^{α-1}
        let (a, lambda) = (0.35, 200.0);
        let al = Alpha::new(a).unwrap();
        let mut rng = RngState::new(8, 8);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_tilted_stable(al, lambda, &mut rng))
            .collect();
        let (m, se) = mean_se(&xs);
        let target = a * lambda.powf(a - 1.0);
        assert!((m - target).abs() < 4.0 * se, "{m} vs {target}");
    }

    #[test]
    fn block_count_two_customers() {
        let al = Alpha::new(0.5).unwrap();
        let mut rng = RngState::new(2, 0);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_block_count_conditional(2, 1.0, al, &mut rng).unwrap() == 1)
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt());
        assert_eq!(
            sample_block_count_conditional(1, 3.0, al, &mut rng).unwrap(),
            1
        );
    }

    #[test]
    fn r_sequence_identity_and_zero_rate() {
        let al = Alpha::new(0.4).unwrap();
        let mut rng = RngState::new(4, 0);
        let seq = sample_R_sequence(30, 1.7, al, &mut rng);
        let x = 1.7f64.powf(0.4);
        let mut ln_prod = 0.0;
        for k in 0..30 {
            assert!((seq.r[k] + seq.one_minus_r[k] - 1.0).abs() < 1e-15);
            ln_prod += 0.4 * seq.r[k].ln();
            let lhs = (x.ln() - ln_prod).exp();
            assert!((lhs / (seq.gtilde[k] + x) - 1.0).abs() < 1e-12);
        }
        let z = sample_R_sequence(5, 0.0, al, &mut rng);
        assert_eq!(z.r[0], 0.0);
        assert_eq!(z.one_minus_r[0], 1.0);
    }

    #[test]
    fn crp_two_customers() {
        let al = Alpha::new(0.5).unwrap();
        let mut rng = RngState::new(6, 0);
        let n = 200_000;
        let twos = (0..n)
            .filter(|_| sample_crp_block_count(2, al, 0.5, &mut rng).unwrap() == 2)
            .count();
        let p = twos as f64 / n as f64;
        let se = (2.0 / 9.0 / n as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 4.0 * se);
        assert!(sample_crp_block_count(3, al, -0.5, &mut rng).is_err());
    }

    #[test]
    fn gem_lambda_domain_and_mean() {
        let al = Alpha::new(0.5).unwrap();
        let mut rng = RngState::new(7, 0);
        assert!(sample_gem_lambda(0, 0.0, al, &mut rng).is_err());
        assert!(sample_gem_lambda(2, -0.6, al, &mut rng).is_err());
        // θ = α, m = 0: λ^α ~ Exp(1)
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_gem_lambda(0, 0.5, al, &mut rng).unwrap().powf(0.5))
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn gamma_degenerate_shape_is_zero() {
        let mut rng = RngState::new(0, 0);
        assert_eq!(sample_gamma(1e-13, &mut rng), 0.0);
        assert_eq!(sample_gamma(0.0, &mut rng), 0.0);
        assert!(sample_gamma(1e-6, &mut rng) >= 0.0);
    }

    #[test]
    fn y_is_positive() {
        let al = Alpha::new(0.7).unwrap();
        let s = CondSampler::new(al, 6).unwrap();
        let mut rng = RngState::new(1, 1);
        for ell in 0..6 {
            for _ in 0..200 {
                assert!(s.y(6, ell, 0.8, &mut rng).unwrap() > 0.0);
            }
        }
        assert!(s.y(3, 3, 1.0, &mut rng).is_err());
    }
}
