//! Poisson realization of 𝔰𝔬*(4n) on the phase spaces of the classical
//! Sp(1)-Kepler problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`quat`]: quaternions, ℍⁿ and quaternionic matrices.
//! - [`jordan`]: the Jordan algebra H_n(ℍ) and its structure operators.
//! - [`conformal`]: the conformal algebra V ⊕ 𝔰𝔱𝔯 ⊕ V*.
//! - [`poisson`]: canonical brackets on T*ℍⁿ_* with an exact quadratic engine.
//! - [`realization`]: the observables 𝒳, 𝒴, 𝒮, ℒ and the identity checks.
//! - [`sternberg`]: the Kepler cone, horizontal lifts and pullbacks.
//! - [`dynamics`]: the Kepler flow upstairs and conservation monitoring.
//! - [`cli`]: command drivers and JSON reports.

pub mod cli;
pub mod conformal;
pub mod dynamics;
pub mod error;
pub mod jordan;
pub mod poisson;
pub mod quat;
pub mod realization;
pub mod rng;
pub mod sternberg;
pub mod tol;

pub use error::{Error, Result};
