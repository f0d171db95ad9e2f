//! Decide whether a one-parameter family of curves or hypersurfaces is the
//! family of level sets of a harmonic function with nonvanishing gradient,
//! and if so, rebuild that function from geometry alone.
//!
//! A family is a map `(sigma, t) -> y` from chart coordinates and a leaf
//! parameter into ambient space, given as expressions (see [`expr`]). The
//! pipeline has three stages:
//!
//! 1. **Check** ([`checker`]): sample `lambda = d(density)/ds + (n-1) H density`
//!    on a grid. The family passes exactly when `lambda` is constant on every
//!    leaf; the constant may vary from leaf to leaf.
//! 2. **Reconstruct** ([`reconstruct`]): integrate the profile ODE
//!    `u'' = lambda(t) u'` and tabulate `u`, so that `U(y) = u(t(y))` is the
//!    harmonic function in the gauge `u(0) = u0`, `u'(0) = du0`.
//! 3. **Verify** ([`flow`], [`reconstruct`]): along any normal flow line, the
//!    gradient magnitude must follow
//!    `|grad U|(s) = |grad U|(0) * exp((n-1) * integral of H ds)`; the same
//!    law yields a second, table-free route to the value of `U`.
//!
//! [`oracle`] holds closed-form reference fields and the built-in catalog of
//! example families, giving every computed quantity an independent check.
//!
//! Everything numeric is generic over the scalar type through [`Scalar`]
//! (any `num_traits::Float` with a handful of conversions); the `*64` aliases
//! below pin the common `f64` instantiations.

pub mod checker;
pub mod config;
pub mod error;
pub mod expr;
pub mod family;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod numerics;
pub mod oracle;
pub mod reconstruct;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Expression over `f64`.
pub type Expr64 = expr::Expression<f64>;
/// Family over `f64`.
pub type Family64 = family::FamilySpec<f64>;
/// Dense matrix over `f64`.
pub type Matrix64 = linalg::Matrix<f64>;
/// Check report over `f64`.
pub type CheckReport64 = checker::CheckReport<f64>;
/// Reconstructed profile over `f64`.
pub type Reconstruction64 = reconstruct::ReconstructionResult<f64>;
/// Gauge over `f64`.
pub type Gauge64 = reconstruct::Gauge<f64>;
/// Resolved tolerances over `f64`.
pub type Tolerances64 = config::Tolerances<f64>;
