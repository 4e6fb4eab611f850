//! Spectra and regularized traces of second-order two-point boundary-value
//! operators `-y'' + q y = lambda y` on `[a, b]`, where the potential `q` is a
//! finite complex measure: point masses plus a piecewise-constant density.
//!
//! The crate computes eigenvalues through exact transfer matrices, builds
//! Green functions and resolvent contour integrals, evaluates the classical
//! asymptotic expansions for every regular boundary-condition class, and
//! verifies the regularized trace formula
//! `S(q) = A Q'(a) + B Q'(b) - (1/8) sum h_j^2`
//! by Cesaro summation of eigenvalue differences.

pub mod asymptotics;
pub mod bc;
pub mod error;
pub mod green;
pub mod measure;
pub mod problem;
pub mod propagator;
pub mod quad;
pub mod scaled;
pub mod spectrum;
pub mod summation;
pub mod trace;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
