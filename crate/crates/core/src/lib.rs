//! Workbench for online matrix discrepancy.
//!
//! Given a stream of random symmetric matrices `A_1, A_2, ...`, an online
//! signer picks `x_t ∈ {±1}` knowing only `A_1..A_t`, trying to keep the
//! running signed sum `M_t = Σ x_s A_s` small in operator norm. This crate
//! provides:
//!
//! - [`symlin`]: symmetric-matrix kernel (eigendecomposition, spectral
//!   matrix functions, norms, isometric vectorization, log-domain trace cosh).
//! - [`ensembles`]: samplers for GOE, conditioned Wigner, normalized Wishart,
//!   random projection and Rademacher rank-one ensembles, driven by
//!   splittable deterministic random streams.
//! - [`signer`]: the matrix hyperbolic cosine (MHC) online signer, random and
//!   greedy baselines, and an exhaustive offline discrepancy oracle.
//! - [`diagnostics`]: Monte Carlo estimators for anti-concentration and
//!   unbiasedness constants.
//! - [`bounds`]: first-moment lower-bound calculators and certificates.
//! - [`harness`]: config parsing, seeded experiment execution, CSV output
//!   and the command line.

pub mod bounds;
pub mod diagnostics;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod signer;
pub mod stats;
pub mod symlin;

pub use error::{Error, Result};
pub use symlin::SymMatrix;
