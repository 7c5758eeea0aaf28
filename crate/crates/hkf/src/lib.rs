//! Empirical Bayes and Kernel Flow hyperparameter estimation for Gaussian
//! process regression with spectrally defined kernels.
//!
//! The crate is organised bottom-up:
//!
//! * [`torus`]: Fourier lattices, periodized symbols, Mercer kernels and
//!   Karhunen–Loève sampling on `T^d`.
//! * [`operators`]: finite-difference elliptic operators on `[0, 1]` with
//!   Dirichlet ends, their fractional powers and composite covariances.
//! * [`gpr`]: Gram factorizations, conditional means and the EB/KF losses.
//! * [`oracle`]: closed-form Fourier versions of the torus quantities.
//! * [`estimators`]: bounded scalar and simplex minimization.
//! * [`experiments`]: configuration-driven experiment runners.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod gpr;
pub mod numeric;
pub mod operators;
pub mod oracle;
pub mod torus;

pub use error::{Error, Result};
