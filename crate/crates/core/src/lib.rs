//! Sketched F-test for the global null `H0: beta = 0` in high-dimensional
//! linear regression.
//!
//! The crate is organised bottom-up:
//!
//! * [`numkit`]: normal / F special functions and noncentral-F moments.
//! * [`models`]: reproducible generators for spectra, eigenbases,
//!   coefficients, designs, noise and Gaussian sketches.
//! * [`ftest`]: the classical F-test and its sketched counterpart.
//! * [`power`]: retained signal `Δ_k²`, asymptotic power curves, ARE and
//!   a Chebyshev bound on the Type II error.
//! * [`intrinsic`]: intrinsic-dimension conditions, minimal-`r` search and
//!   sketch-size selection.
//! * [`oracles`]: numerical verifiers for the concentration and
//!   signal-capture lemmas the power guarantees rest on.

pub mod error;
pub mod ftest;
pub mod intrinsic;
pub(crate) mod linalg;
pub mod models;
pub mod numkit;
pub mod oracles;
pub mod power;

pub use error::{Error, Result};
