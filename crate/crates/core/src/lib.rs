//! Solver and verification harness for the variable-density incompressible
//! Navier–Stokes–Fourier system with a temperature-degenerate viscosity.
//!
//! The crate is organised bottom-up:
//!
//! * [`coefficients`]: constitutive laws μ(θ), κ(θ), renormalization functions
//!   h and the Kirchhoff transforms K, K_h, H.
//! * [`grid`]: the rectangle, nodal fields, trapezoid quadrature and the
//!   discrete calculus used everywhere else.
//! * [`basis`]: the divergence-free, no-slip Galerkin space built from
//!   clamped stream-function modes, plus matrix assembly.
//! * [`transport`], [`thermal`], [`momentum`]: one-step solvers for the
//!   density, temperature and Galerkin momentum equations.
//! * [`coupler`]: the per-step fixed-point iteration, the time loop and the
//!   continuation sweep over (n, ε, δ).
//! * [`degiorgi`]: level-set truncations, level energies and the
//!   temperature lower-bound certificate.
//! * [`diagnostics`]: energy inequality, renormalized inequality and a priori
//!   bound monitors on computed trajectories.
//! * [`config`], [`io`]: the run configuration format and all serialized
//!   outputs.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Reductions
//! are chunked with a fixed chunk size so both builds produce bitwise
//! identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod coefficients;
pub mod config;
pub mod coupler;
pub mod degiorgi;
pub mod diagnostics;
mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod momentum;
pub mod par;
pub mod quad;
pub mod thermal;
pub mod transport;

pub use error::{Error, Result};
