//! Rank-constrained Grothendieck constants and the Krivine-style randomized
//! rounding pipeline for rank-r semidefinite programs.
//!
//! The crate is organised bottom-up:
//!
//! * [`power_series`] and [`hp`] hold high-precision odd series (the Taylor
//!   coefficients of `E_r` and of its compositional inverse).
//! * [`special`] evaluates `E_r` independently (hypergeometric and quadrature
//!   routes), incomplete gamma and Gegenbauer polynomials.
//! * [`constants`] solves for `beta(r, G)`, `beta(q -> r, G)` and evaluates the
//!   truncated-rounding factor.
//! * [`graph`], [`theta`], [`sdp`], [`embedding`] and [`rounding`] implement the
//!   pipeline from a weighted graph to a rank-r feasible solution.
//! * [`apps`] wraps the pipeline for n-vector ground states and XOR games.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod constants;
pub mod embedding;
pub mod error;
pub mod exec;
pub mod graph;
pub mod hp;
pub(crate) mod linalg;
pub mod power_series;
pub mod rounding;
pub mod sdp;
pub mod special;
pub mod theta;

pub use error::{Error, Result};
pub use exec::Backend;
