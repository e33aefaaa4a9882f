//! Eigensolver for the buckling pencil K - lambda*K_G when K is positive
//! semi-definite, K_G is indefinite, and the pencil is singular (K and K_G
//! share a common nullspace).
//!
//! The solver applies a shift-invert Lanczos iteration to the transformed
//! operator C = (K - sigma*K_G)^+ K, run in the inner product of a
//! regularized positive definite matrix M obtained from a low-rank update of
//! K. Computed eigenpairs are validated by counting pencil eigenvalues on
//! intervals through matrix inertias.
//!
//! Modules follow the pipeline: [`matio`] loads pencils and bases,
//! [`transform`] builds the shift-invert operator and the M inner product,
//! [`lanczos`] runs the iteration, [`counting`] validates the results, and
//! [`canonical`] provides the dense canonical-form ground truth used by the
//! test oracles. [`problems`] generates synthetic pencils with known spectra.

pub mod canonical;
pub mod cli;
pub mod counting;
pub mod dense;
pub mod error;
pub mod lanczos;
pub mod matio;
pub mod problems;
pub mod transform;

pub use error::{Error, Result};
