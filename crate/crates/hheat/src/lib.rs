//! Numerical laboratory for the semilinear heat equation
//! `u_t − Δ_H u = −k(t) u^p` on the Heisenberg group `H^n`.
//!
//! The crate provides, bottom-up:
//!
//! - [`group`] — exact Heisenberg group algebra (product, inverse,
//!   parabolic dilations, Korányi gauge and distance);
//! - [`field`] — sampled scalar fields on an `(x, y, τ)` lattice with the
//!   discrete horizontal gradient and sub-Laplacian;
//! - [`kernel`] — heat-kernel evaluation by oscillatory quadrature, the
//!   group convolution, the heat semigroup, and kernel identity checks;
//! - [`solver`] — a positivity-preserving Strang/Lie splitting integrator
//!   for the absorbed flow, with mass accounting;
//! - [`montecarlo`] — an independent stochastic oracle for the kernel
//!   (horizontal diffusion sampled by Euler–Maruyama);
//! - [`asymptotics`] — experiment layer: mass-decay dichotomy sweeps,
//!   profile convergence, cut-off test functions and capacity estimates;
//! - [`config`] / [`verify`] — run configuration and the one-shot
//!   invariant battery behind the `hheat` binary.
//!
//! Each major capability has a runnable demo under `examples/`.

pub mod error;
pub mod field;
pub mod group;
pub mod kernel;
pub(crate) mod util;

pub use error::{Error, Result};
