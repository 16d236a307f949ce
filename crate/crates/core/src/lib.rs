//! Diagonal Riccati stability for matrix pairs `(A, B)`.
//!
//! Decides whether diagonal `P, Q > 0` exist with
//! `A^T P + P A + Q + P B Q^{-1} B^T P < 0`, produces verified certificates
//! or infeasibility witnesses, and applies certificates to delayed
//! generalized Lotka-Volterra systems.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod lv;
pub mod matcore;
pub mod riccati;
pub mod search;
pub mod structured;
pub mod synth;

pub use error::{Error, Result};
pub use matcore::{PositiveVector, RealMatrix, RealVector, DEFAULT_TOL};
pub use riccati::{DiagonalPair, RiccatiCertificate};
pub use search::{DecisionResult, SearchOptions, Verdict};
pub use structured::InfeasibilityWitness;
