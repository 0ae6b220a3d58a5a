//! fracpath: simulation of fractional Brownian motion and numerical
//! verification of pathwise integral representations of convex functions of
//! geometric and arithmetic averages of geometric fBm.
//!
//! The library is organized bottom-up:
//!
//! - [`grid`]: time grids, sampled paths, refinement-aware integral results
//! - [`stats`]: small regression/quantile helpers
//! - [`fbm`]: exact-covariance fBm samplers (Cholesky and circulant
//!   embedding) with deterministic per-path seeding
//! - [`path_model`]: the derived processes S = e^B, the running geometric
//!   and arithmetic averages, convex payoffs with exact left derivatives,
//!   and empirical regularity estimators
//! - [`riemann`]: tagged Riemann–Stieltjes sums over nested dyadic grids
//! - [`frac_calc`]: Riemann–Liouville fractional integrals/derivatives,
//!   the generalized Lebesgue–Stieltjes integral, and fractional Besov-norm
//!   diagnostics
//! - [`representation`]: assembly and Monte Carlo verification of the
//!   hedging identities, plus the average-strike arbitrage experiment
//! - [`funcderiv`]: vertical/horizontal derivatives of non-anticipative
//!   functionals and chain/product-rule checks
//! - [`cli`]: the `fracpath` command-line experiment driver

pub mod cli;
pub mod error;
pub mod fbm;
pub mod frac_calc;
pub mod funcderiv;
pub mod grid;
pub mod path_model;
pub mod representation;
pub mod riemann;
pub mod stats;

pub use error::{Error, Result};
