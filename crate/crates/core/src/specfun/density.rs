//! Density objects over adaptive windows.
//!
//! Every density is integrated in an unbounded coordinate `s`: `x = e^s` on
//! `(0, ∞)` and a logistic map on a bounded interval. Power-law behaviour at
//! either end turns into exponential decay in `s`, so one window finder and
//! one quadrature path serve all densities. The window is grown from the
//! mode until the remaining tail, estimated from the local decay rate, is
//! negligible.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::kernel::{ln_neg_moment, ln_w_conditional_pdf_parts, Kernel};
use super::stable::{stable_ln_pdf_with, CondStableLaw};
use super::DensityGrid;
use crate::error::{domain, Error, Result};
use crate::quad::{gauss_kronrod21, integrate, QuadConfig};
use crate::Alpha;

const S_LIMIT: f64 = 700.0;

/// Support of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Positive,
    Interval { lo: f64, hi: f64 },
}

impl Support {
    /// `(x, x - lo, hi - x, log dx/ds)` at coordinate `s`.
    pub fn from_coord(self, s: f64) -> (f64, f64, f64, f64) {
        match self {
            Support::Positive => {
                let x = s.exp();
                (x, x, f64::INFINITY, s)
            }
            Support::Interval { lo, hi } => {
                let w = hi - lo;
                let sig = logistic(s);
                let sig_neg = logistic(-s);
                let lower = w * sig;
                let upper = w * sig_neg;
                let x = if s < 0.0 { lo + lower } else { hi - upper };
                (x, lower, upper, w.ln() + ln_logistic(s) + ln_logistic(-s))
            }
        }
    }

    /// Inverse of [`Support::from_coord`]; `±∞` outside the support.
    pub fn to_coord(self, x: f64) -> f64 {
        match self {
            Support::Positive => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    x.ln()
                }
            }
            Support::Interval { lo, hi } => {
                if x <= lo {
                    f64::NEG_INFINITY
                } else if x >= hi {
                    f64::INFINITY
                } else {
                    ((x - lo) / (hi - x)).ln()
                }
            }
        }
    }

    /// Distances to the lower and upper boundary, if `x` is inside.
    pub fn gaps(self, x: f64) -> Option<(f64, f64)> {
        match self {
            Support::Positive if x > 0.0 => Some((x, f64::INFINITY)),
            Support::Interval { lo, hi } if x > lo && x < hi => Some((x - lo, hi - x)),
            _ => None,
        }
    }
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

fn ln_logistic(s: f64) -> f64 {
    // -log(1 + e^{-s})
    if s > 0.0 {
        -(-s).exp().ln_1p()
    } else {
        s - s.exp().ln_1p()
    }
}

/// A probability density known through its log.
pub trait Density: Sync {
    fn support(&self) -> Support;

    /// `log f(x)`, with `lower = x - lo` and `upper = hi - x` supplied exactly.
    fn ln_pdf_parts(&self, x: f64, lower: f64, upper: f64) -> Result<f64>;

    fn ln_pdf(&self, x: f64) -> Result<f64> {
        match self.support().gaps(x) {
            Some((lower, upper)) => self.ln_pdf_parts(x, lower, upper),
            None => Ok(f64::NEG_INFINITY),
        }
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }
}

fn ln_in_coord<D: Density + ?Sized>(d: &D, s: f64) -> Result<f64> {
    let (x, lower, upper, ln_jac) = d.support().from_coord(s);
    if !(lower > 0.0 && upper > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(d.ln_pdf_parts(x, lower, upper)? + ln_jac)
}

#[derive(Debug, Clone)]
pub(crate) struct Window {
    pub breaks: Vec<f64>,
    pub ln_peak: f64,
    pub scale: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-10 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Finds a window in `s` that holds all but a negligible share of the mass of
/// `exp(ln_g)`.
pub(crate) fn find_window<F: Fn(f64) -> f64 + Sync>(ln_g: &F) -> Result<Window> {
    let clean = |s: f64| {
        let v = ln_g(s);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (lo, hi, step) in [(-60.0, 60.0, 0.5), (-S_LIMIT, S_LIMIT, 5.0)] {
        let n = ((hi - lo) / step) as usize;
        let scan: Vec<(f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let s = lo + step * i as f64;
                (s, clean(s))
            })
            .collect();
        for (s, v) in scan {
            if v > best.1 {
                best = (s, v);
            }
        }
        if best.1.is_finite() {
            break;
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Numeric {
            message: "density has no finite value on the search range".into(),
            achieved_error: f64::INFINITY,
        });
    }
    let mode = golden_max(
        &clean,
        (best.0 - 0.5).max(-S_LIMIT),
        (best.0 + 0.5).min(S_LIMIT),
    );
    let ln_peak = clean(mode).max(best.1);
    let h = 1e-3;
    let curv = -(clean(mode + h) - 2.0 * clean(mode) + clean(mode - h)) / (h * h);
    let scale = if curv.is_finite() && curv > 0.0 {
        (1.0 / curv.sqrt()).clamp(1e-6, 0.5)
    } else {
        0.5
    };
    let ln_cut = ln_peak + scale.ln() + (1e-14f64).ln();
    let walk = |dir: f64| -> Vec<f64> {
        let mut out = Vec::new();
        let mut s = mode;
        let mut step = scale;
        let mut prev = ln_peak;
        for _ in 0..2000 {
            let next = s + dir * step;
            if next.abs() >= S_LIMIT {
                out.push(dir * S_LIMIT);
                break;
            }
            let v = clean(next);
            out.push(next);
            if v == f64::NEG_INFINITY {
                break;
            }
            let decay = (prev - v) / step;
            if v < ln_peak - 30.0 && decay > 0.0 && v - decay.ln() < ln_cut {
                break;
            }
            prev = v;
            s = next;
            step = (step * 1.3).min(4.0);
        }
        out
    };
    let mut left = walk(-1.0);
    let right = walk(1.0);
    left.reverse();
    let mut breaks = left;
    breaks.push(mode);
    breaks.extend(right);
    Ok(Window {
        breaks,
        ln_peak,
        scale,
    })
}

fn integrate_pieces<F: Fn(f64) -> f64 + Sync>(
    f: &F,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    let rough: f64 = breaks
        .windows(2)
        .map(|w| gauss_kronrod21(f, w[0], w[1]).0.abs())
        .sum();
    let pieces = (breaks.len() - 1).max(1) as f64;
    let piece_cfg = QuadConfig {
        abs_tol: cfg.abs_tol.max(cfg.rel_tol * rough / pieces),
        ..*cfg
    };
    let parts: Vec<Result<(f64, f64)>> = breaks
        .par_windows(2)
        .map(|w| integrate(f, w[0], w[1], &piece_cfg).map(|r| (r.value, r.abs_error)))
        .collect();
    let mut total = 0.0;
    let mut err = 0.0;
    for p in parts {
        let (v, e) = p?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

/// `log ∫ exp(ln_g(s)) ds` over the real line, with the absolute error of the
/// (unlogged) integral.
pub(crate) fn integrate_log_coordinate<F: Fn(f64) -> f64 + Sync>(
    ln_g: &F,
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    let win = find_window(ln_g)?;
    let peak = win.ln_peak;
    let f = |s: f64| {
        let v = (ln_g(s) - peak).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let (total, err) = integrate_pieces(&f, &win.breaks, cfg)?;
    Ok((peak + total.ln(), err * peak.exp()))
}

/// Mass of a density over its adaptive window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    pub mass: f64,
    pub abs_error: f64,
    pub window: (f64, f64),
}

pub fn total_mass<D: Density + ?Sized>(d: &D, cfg: &QuadConfig) -> Result<MassReport> {
    let ln_g = |s: f64| ln_in_coord(d, s).unwrap_or(f64::NAN);
    let win = find_window(&ln_g)?;
    let peak = win.ln_peak;
    let f = |s: f64| {
        let v = (ln_g(s) - peak).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let (total, err) = integrate_pieces(&f, &win.breaks, cfg)?;
    let support = d.support();
    Ok(MassReport {
        mass: total * peak.exp(),
        abs_error: err * peak.exp(),
        window: (
            support.from_coord(win.breaks[0]).0,
            support.from_coord(*win.breaks.last().unwrap()).0,
        ),
    })
}

/// Evaluates the density on `points` equally spaced abscissae in `[min, max]`.
pub fn tabulate<D: Density + ?Sized>(
    d: &D,
    min: f64,
    max: f64,
    points: usize,
) -> Result<DensityGrid> {
    if !(min < max) || points < 2 {
        return domain(format!(
            "grid needs min < max and at least two points, got ({min}, {max}, {points})"
        ));
    }
    let pts: Result<Vec<(f64, f64)>> = (0..points)
        .into_par_iter()
        .map(|i| {
            let t = if i + 1 == points {
                max
            } else {
                min + (max - min) * i as f64 / (points - 1) as f64
            };
            Ok((t, d.pdf(t)?))
        })
        .collect();
    Ok(DensityGrid { points: pts? })
}

/// Tabulated cdf: exact cell masses by adaptive quadrature, cubic Hermite
/// interpolation inside cells using the density as the derivative.
#[derive(Debug, Clone)]
pub struct CdfTable {
    support: Support,
    nodes: Vec<f64>,
    cum: Vec<f64>,
    dens: Vec<f64>,
}

impl CdfTable {
    pub fn build<D: Density + ?Sized>(d: &D, cfg: &QuadConfig) -> Result<Self> {
        let support = d.support();
        let ln_g = |s: f64| ln_in_coord(d, s).unwrap_or(f64::NAN);
        let win = find_window(&ln_g)?;
        let peak = win.ln_peak;
        let g = |s: f64| {
            let v = (ln_g(s) - peak).exp();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let h = (win.scale / 2.0).min(0.1);
        let mut nodes = vec![win.breaks[0]];
        for w in win.breaks.windows(2) {
            let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            for j in 1..=n {
                nodes.push(if j == n {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * j as f64 / n as f64
                });
            }
        }
        let (rough, _) = integrate_pieces(&g, &win.breaks, cfg)?;
        let cell_cfg = QuadConfig {
            abs_tol: cfg.rel_tol * rough / nodes.len() as f64,
            ..*cfg
        };
        let cells: Result<Vec<f64>> = nodes
            .par_windows(2)
            .map(|w| integrate(g, w[0], w[1], &cell_cfg).map(|r| r.value))
            .collect();
        let cells = cells?;
        let scale = peak.exp();
        let dens: Vec<f64> = nodes.par_iter().map(|&s| g(s) * scale).collect();
        let mut cum = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for c in cells {
            acc += c * scale;
            cum.push(acc);
        }
        Ok(CdfTable {
            support,
            nodes,
            cum,
            dens,
        })
    }

    /// Mass captured by the table window.
    pub fn mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.support.to_coord(x);
        let n = self.nodes.len();
        if s <= self.nodes[0] {
            return 0.0;
        }
        if s >= self.nodes[n - 1] {
            return self.mass().min(1.0);
        }
        let i = self.nodes.partition_point(|&v| v <= s) - 1;
        let (s0, s1) = (self.nodes[i], self.nodes[i + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cum[i]
            + (t3 - 2.0 * t2 + t) * h * self.dens[i]
            + (-2.0 * t3 + 3.0 * t2) * self.cum[i + 1]
            + (t3 - t2) * h * self.dens[i + 1];
        v.clamp(0.0, 1.0)
    }
}

/// Density given by a closure `(x, x - lo, hi - x) -> log f`.
pub struct LnPdfFn<F> {
    support: Support,
    f: F,
}

impl<F> LnPdfFn<F>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    pub fn new(support: Support, f: F) -> Self {
        LnPdfFn { support, f }
    }
}

impl<F> Density for LnPdfFn<F>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn support(&self) -> Support {
        self.support
    }

    fn ln_pdf_parts(&self, x: f64, lower: f64, upper: f64) -> Result<f64> {
        Ok((self.f)(x, lower, upper))
    }
}

/// `f_α`.
#[derive(Debug, Clone)]
pub struct StableDensity {
    pub alpha: Alpha,
    pub quad: QuadConfig,
}

impl StableDensity {
    pub fn new(alpha: Alpha) -> Self {
        StableDensity {
            alpha,
            quad: QuadConfig::default(),
        }
    }
}

impl Density for StableDensity {
    fn support(&self) -> Support {
        Support::Positive
    }

    fn ln_pdf_parts(&self, x: f64, _: f64, _: f64) -> Result<f64> {
        stable_ln_pdf_with(x, self.alpha, &self.quad)
    }
}

/// Density of `S_{α,ρ}(λ)`.
#[derive(Debug, Clone)]
pub struct CondStableDensity(pub CondStableLaw);

impl CondStableDensity {
    pub fn new(alpha: Alpha, lambda: f64, rho: f64) -> Result<Self> {
        CondStableLaw::new(alpha, lambda, rho).map(CondStableDensity)
    }
}

impl Density for CondStableDensity {
    fn support(&self) -> Support {
        Support::Positive
    }

    fn ln_pdf_parts(&self, x: f64, _: f64, _: f64) -> Result<f64> {
        self.0.ln_pdf(x)
    }
}

/// Density of `Y_{m,m-k}(λ)/λ`.
#[derive(Debug, Clone)]
pub struct YDensity {
    kernel: Kernel,
    lambda: f64,
    m: usize,
    k: usize,
}

impl YDensity {
    pub fn new(alpha: Alpha, lambda: f64, m: usize, k: usize) -> Result<Self> {
        let kernel = Kernel::new(alpha, m)?;
        // validates (λ, m, k)
        kernel.ln_y_pdf(1.0, lambda, m, k)?;
        Ok(YDensity {
            kernel,
            lambda,
            m,
            k,
        })
    }
}

impl Density for YDensity {
    fn support(&self) -> Support {
        Support::Positive
    }

    fn ln_pdf_parts(&self, x: f64, _: f64, _: f64) -> Result<f64> {
        self.kernel.ln_y_pdf(x, self.lambda, self.m, self.k)
    }
}

/// Density `f_{m,k}(r | λ)` of `λ/(λ + Y_{m,m-k}(λ))`.
#[derive(Debug, Clone)]
pub struct R1mDensity {
    kernel: Kernel,
    lambda: f64,
    m: usize,
    k: usize,
}

impl R1mDensity {
    pub fn new(alpha: Alpha, lambda: f64, m: usize, k: usize) -> Result<Self> {
        let kernel = Kernel::new(alpha, m)?;
        kernel.ln_r1m_pdf_parts(0.5, 0.5, lambda, m, k)?;
        Ok(R1mDensity {
            kernel,
            lambda,
            m,
            k,
        })
    }
}

impl Density for R1mDensity {
    fn support(&self) -> Support {
        Support::Interval { lo: 0.0, hi: 1.0 }
    }

    fn ln_pdf_parts(&self, x: f64, _: f64, upper: f64) -> Result<f64> {
        self.kernel
            .ln_r1m_pdf_parts(x, upper, self.lambda, self.m, self.k)
    }
}

/// `B_{m,α}(w | r)` on `(r, 1)`.
#[derive(Debug, Clone)]
pub struct WConditionalDensity {
    alpha: Alpha,
    r: f64,
    m: usize,
}

impl WConditionalDensity {
    pub fn new(alpha: Alpha, r: f64, m: usize) -> Result<Self> {
        ln_w_conditional_pdf_parts(
            0.5 * (1.0 + r),
            0.5 * (1.0 - r),
            0.5 * (1.0 - r),
            r,
            m,
            alpha,
        )?;
        Ok(WConditionalDensity { alpha, r, m })
    }
}

impl Density for WConditionalDensity {
    fn support(&self) -> Support {
        Support::Interval {
            lo: self.r,
            hi: 1.0,
        }
    }

    fn ln_pdf_parts(&self, x: f64, lower: f64, upper: f64) -> Result<f64> {
        ln_w_conditional_pdf_parts(x, lower, upper, self.r, self.m, self.alpha)
    }
}

/// Density of the GEM-mixing rate `G_{m+θ}/S_{α,θ}`:
/// `α Ω_m(y^α) y^{α+θ-1} e^{-y^α} / (Γ(m+θ) E[S_α^{-θ}])`.
#[derive(Debug, Clone)]
pub struct GemLambdaDensity {
    kernel: Kernel,
    theta: f64,
    m: usize,
    ln_const: f64,
}

impl GemLambdaDensity {
    pub fn new(alpha: Alpha, theta: f64, m: usize) -> Result<Self> {
        let a = alpha.get();
        if !(theta > -a) {
            return domain(format!("GEM mixing needs theta > -alpha, got {theta}"));
        }
        if m == 0 && !(theta > 0.0) {
            return domain(format!(
                "GEM mixing with m = 0 needs theta > 0, got {theta}"
            ));
        }
        let kernel = Kernel::new(alpha, m)?;
        let ln_const = a.ln() - ln_gamma(m as f64 + theta) - ln_neg_moment(theta, alpha)?;
        Ok(GemLambdaDensity {
            kernel,
            theta,
            m,
            ln_const,
        })
    }
}

impl Density for GemLambdaDensity {
    fn support(&self) -> Support {
        Support::Positive
    }

    fn ln_pdf_parts(&self, y: f64, _: f64, _: f64) -> Result<f64> {
        let a = self.kernel.alpha().get();
        let x = y.powf(a);
        if x == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.ln_const + self.kernel.ln_omega(self.m, x)? + (a + self.theta - 1.0) * y.ln() - x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip() {
        let sup = Support::Interval { lo: 0.3, hi: 1.0 };
        for &s in &[-30.0, -1.0, 0.0, 2.5, 30.0] {
            let (x, lo, hi, _) = sup.from_coord(s);
            assert!((lo + hi - 0.7).abs() < 1e-15);
            assert!(x > 0.3 && x < 1.0 || s.abs() > 20.0);
            if s.abs() < 20.0 {
                assert!((sup.to_coord(x) - s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gaussian_mass_and_cdf() {
        let d = LnPdfFn::new(Support::Positive, |x: f64, _, _| {
            // half-normal on (0, ∞)
            (2.0 / std::f64::consts::PI).sqrt().ln() - 0.5 * x * x
        });
        let m = total_mass(&d, &QuadConfig::with_rel_tol(1e-10)).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-9, "{:?}", m);
        let t = CdfTable::build(&d, &QuadConfig::default()).unwrap();
        // P(|Z| < 1) = erf(1/√2)
        assert!((t.cdf(1.0) - 0.682_689_492_137_086).abs() < 1e-7);
    }

    #[test]
    fn heavy_tail_window_is_found() {
        // Pareto(0.2) on (1, ∞) shifted to (0, ∞): f = 0.2 (1+x)^{-1.2}
        let d = LnPdfFn::new(Support::Positive, |x: f64, _, _| {
            0.2f64.ln() - 1.2 * x.ln_1p()
        });
        let m = total_mass(&d, &QuadConfig::default()).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-6, "{:?}", m);
    }

    fn assert_unit_mass<D: Density>(d: &D, tol: f64) {
        let m = total_mass(d, &QuadConfig::default()).unwrap();
        assert!((m.mass - 1.0).abs() < tol, "{:?}", m);
    }

    #[test]
    fn conditioned_densities_have_unit_mass() {
        for &a in &[0.3, 0.5, 0.7] {
            let alpha = Alpha::new(a).unwrap();
            assert_unit_mass(&StableDensity::new(alpha), 1e-6);
            for &lambda in &[0.5, 1.0, 2.0] {
                for &m in &[1usize, 2, 5] {
                    assert_unit_mass(
                        &CondStableDensity::new(alpha, lambda, m as f64).unwrap(),
                        1e-6,
                    );
                    for k in 1..=m {
                        assert_unit_mass(&YDensity::new(alpha, lambda, m, k).unwrap(), 1e-6);
                        assert_unit_mass(&R1mDensity::new(alpha, lambda, m, k).unwrap(), 1e-6);
                    }
                }
                assert_unit_mass(&CondStableDensity::new(alpha, lambda, 0.0).unwrap(), 1e-6);
                assert_unit_mass(&CondStableDensity::new(alpha, lambda, -0.4).unwrap(), 1e-6);
            }
            for &r in &[0.05, 0.4, 0.9] {
                for &m in &[1usize, 2, 5] {
                    assert_unit_mass(&WConditionalDensity::new(alpha, r, m).unwrap(), 1e-8);
                }
            }
            for &m in &[0usize, 1, 2, 5] {
                assert_unit_mass(&GemLambdaDensity::new(alpha, 0.5, m).unwrap(), 1e-6);
            }
        }
    }
}
