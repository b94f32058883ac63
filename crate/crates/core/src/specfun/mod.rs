//! Deterministic special-function kernel.
//!
//! Generalized Stirling numbers and `Ω_m` live in [`Kernel`]; the positive
//! stable density and its tilts in [`stable`]; the density objects with
//! adaptive windows, normalization and tabulated cdfs in [`density`].

pub mod density;
pub mod kernel;
pub mod stable;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::logspace::log_sum_exp;
use crate::quad::QuadConfig;

pub use density::{
    CdfTable, CondStableDensity, Density, GemLambdaDensity, MassReport, R1mDensity, StableDensity,
    Support, WConditionalDensity, YDensity,
};
pub use kernel::{
    block_pmf_conditional, gen_stirling_log, ln_beta_shift_moment, ln_neg_moment, ln_r1_pdf,
    ln_w_conditional_pdf_parts, n_conditional_pmf, n_marginal_pmf, neg_moment, omega, pd_block_pmf,
    r1m_pdf, tilted_moment, w_conditional_pdf, y_pdf, Kernel,
};
pub use stable::{cond_stable_pdf, stable_ln_pdf, stable_pdf, CondStableLaw};

/// Table cap and quadrature tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecConfig {
    pub max_m: usize,
    pub quad: QuadConfig,
}

impl Default for SpecConfig {
    fn default() -> Self {
        SpecConfig {
            max_m: 512,
            quad: QuadConfig::default(),
        }
    }
}

/// A pmf on `k = 1..=len`, held as normalized natural-log weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    log_weights: Vec<f64>,
}

impl PmfTable {
    /// Normalizes unnormalized log weights with log-sum-exp.
    pub fn from_log_weights(mut log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return domain("pmf table needs at least one cell");
        }
        if log_weights
            .iter()
            .any(|w| w.is_nan() || *w == f64::INFINITY)
        {
            return domain("pmf table has a NaN or infinite log weight");
        }
        let norm = log_sum_exp(&log_weights);
        if !norm.is_finite() {
            return domain("pmf table has no positive mass");
        }
        for w in &mut log_weights {
            *w -= norm;
        }
        Ok(PmfTable { log_weights })
    }

    pub fn support_min(&self) -> usize {
        1
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `P(K = k)`; zero outside the support.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 || k > self.len() {
            0.0
        } else {
            self.log_weights[k - 1].exp()
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn total(&self) -> f64 {
        self.probs().iter().sum()
    }

    /// Inverse-cdf lookup for `u ∈ [0, 1)`; returns `k ∈ 1..=len`.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, w) in self.log_weights.iter().enumerate() {
            acc += w.exp();
            if u < acc {
                return i + 1;
            }
        }
        self.len()
    }
}

/// `(t, f(t))` pairs over a bounded window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub points: Vec<(f64, f64)>,
}

impl DensityGrid {
    /// Trapezoid-rule mass over the grid.
    pub fn trapezoid(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1))
            .sum()
    }
}
