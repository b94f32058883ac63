//! Conditioned Pitman-Yor stick-breaking.
//!
//! The crate evaluates the special functions of stable laws conditioned on a
//! mixed-Poisson species count `N_{S_α}(λ) = m`, draws exact stick-breaking
//! weights for the conditioned laws, and ships a verification harness that
//! checks every sampler against closed-form identities.
//!
//! * [`specfun`]: generalized Stirling numbers, `Ω_m` polynomials, stable and
//!   conditioned densities, and the block-count / mixture pmfs.
//! * [`samplers`]: exact generators for stable, tilted stable, conditioned
//!   stable and auxiliary variables.
//! * [`stickbreak`]: the `m = 0`, `m = 1`, general-`m`, GEM-mixed and
//!   `α = 1/2` stick-breaking pipelines.
//! * [`verify`]: Kolmogorov-Smirnov, chi-square and moment checks bundled
//!   into named suites.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod quad;
pub mod samplers;
pub mod specfun;
pub mod stickbreak;
pub mod verify;

mod alpha;
mod logspace;

pub use alpha::Alpha;
pub use error::{Error, Result};
