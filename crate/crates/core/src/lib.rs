//! Pathwise spectral-Galerkin simulation of the stochastic second grade fluid
//! equation on the 2-torus, driven by linear multiplicative Stratonovich noise
//! with anticipating initial data, plus a numerical Malliavin-calculus toolkit
//! that checks the identities the existence construction relies on.
//!
//! The solution is built as `u = Q·v` with `Q = exp(σW)`, where `v` solves a
//! random PDE without stochastic integrals. Module map:
//!
//! * [`spectral`]: Fourier fields, inner products, eigenbasis, projection.
//! * [`operators`]: `Â`, `B̂`, forcing lift `F̂` and its derivative.
//! * [`wiener`]: Brownian paths, `Q`, its truncation and Malliavin derivative.
//! * [`solver`]: Galerkin integration of `v`, energy monitor, `u ↔ v`.
//! * [`malliavin`]: Malliavin and Fréchet derivatives of `v`, chain rule, `∇u`.
//! * [`stochint`]: Stratonovich/Itô/Skorohod sums and residual checks.
//! * [`harness`]: configuration, studies, reports and plots behind the CLI.

pub mod error;
pub mod fieldio;
pub mod harness;
pub mod malliavin;
pub mod operators;
pub mod solver;
pub mod spectral;
pub mod stochint;
pub mod wiener;

pub use error::{Error, Result};
pub use spectral::{ScalarSpectralField, SpectralField, WaveVector};
