//! Fixed-knot B-spline Kolmogorov-Arnold networks (KANs) with sparse
//! Bayesian spike-and-slab priors.
//!
//! The crate provides:
//!
//! * [`bspline`] — uniform-knot B-spline bases, curves, derivatives and
//!   exact polynomial reproduction;
//! * [`kan`] — the KAN architecture, parameter indexing, forward
//!   evaluation and the clipped-Gaussian regression likelihood;
//! * [`besov`] — anisotropic finite differences, modulus of smoothness
//!   and seminorm diagnostics, plus a catalog of test functions with
//!   known smoothness;
//! * [`planner`] — closed-form architecture sizing, rate exponents and
//!   prior-condition arithmetic;
//! * [`priors`] — spike-and-slab prior families, their densities,
//!   samplers and condition checkers;
//! * [`bounds`] — Lipschitz, activation and covering-number bounds with
//!   empirical verifiers;
//! * [`approx`] — the constructive sparse KAN approximation pipeline
//!   (cardinal splines, product gadgets, term selection, assembly);
//! * [`inference`] — Metropolis-within-Gibbs posterior sampling over
//!   (theta, gamma, sigma^2) with diagnostics.

pub mod approx;
pub mod besov;
pub mod bounds;
pub mod bspline;
pub mod inference;
pub mod kan;
mod linalg;
pub mod planner;
pub mod priors;
pub mod stats;
