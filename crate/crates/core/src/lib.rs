//! Exploration design for finite-horizon regret minimization.
//!
//! The crate has two halves that are meant to be read side by side:
//!
//! - [`regret_model`] solves the abstract exploration-design problem: choose a
//!   sequence of PSD information increments that minimizes the modeled regret
//!   `sum_t tr(W I_t^-1) + tr(Z^-1 L_w,t)` over a fixed horizon. It classifies
//!   each instance as lazy (no excitation) or immediate (one pulse at `t = 1`),
//!   computes closed forms where they exist and solves numerically otherwise.
//! - [`adaptive_sim`] and [`monte_carlo`] run the corresponding time-domain
//!   experiments on a first-order ARX plant under minimum-variance and
//!   linear-quadratic certainty-equivalence control, comparing lazy, immediate
//!   and `1/sqrt(t)`-decaying exploration with common random numbers.
//!
//! [`linalg`] is the small symmetric-matrix kernel both halves share, and
//! [`cli`] holds configuration, CSV output and the subcommand logic behind the
//! `regretlab` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive_sim;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod monte_carlo;
pub mod regret_model;

pub use error::{Error, Result};
