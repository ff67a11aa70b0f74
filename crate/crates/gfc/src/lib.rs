//! Numerical engine for general fractional calculus taken with respect to a
//! monotone map.
//!
//! The central objects are Sonin kernel pairs `(M, K)` whose convolution is
//! identically one, and the integral and differential operators they induce
//! once an increasing map `g` is composed into the convolution.  Everything
//! downstream of the kernel catalog is organised around two ideas:
//!
//! * singular factors are integrated by Gauss-Jacobi rules that carry the
//!   endpoint exponent in the weight, never by sampling the singularity;
//! * every identity of the calculus (Sonin condition, fundamental theorems,
//!   semigroup law, classical reductions) is re-checked numerically and
//!   reported as a residual, not assumed.
//!
//! Module layout:
//!
//! * [`specialfns`]: gamma, lower incomplete gamma, two-parameter
//!   Mittag-Leffler function with explicit evaluation regimes.
//! * [`exprfn`]: a small expression language, symbolic differentiation, and
//!   monotone piecewise-cubic interpolation; both back the shared
//!   [`exprfn::FunctionHandle`] type.
//! * [`monotone`]: validated increasing maps, numeric inversion,
//!   substitution helpers and the built-in map catalog.
//! * [`quadrature`]: Gauss-Jacobi rules, adaptive singular convolution, and
//!   an independent double-exponential oracle integrator.
//! * [`kernels`]: the kernel-pair catalog, Sonin certification, kernel
//!   convolution.
//! * [`operators`]: the integral and derivative operators on a grid, with
//!   two independent evaluation paths.
//! * [`verify`]: residual checks for the calculus identities and the fixed
//!   test battery.
//! * [`econ`]: memory-aware marginal quantities and elasticity for sampled
//!   time series.
//! * [`cli`]: the `gfc` command-line front end.

pub mod cli;
pub mod econ;
pub mod exprfn;
pub mod kernels;
pub mod monotone;
pub mod operators;
pub mod quadrature;
pub mod specialfns;
pub mod verify;
