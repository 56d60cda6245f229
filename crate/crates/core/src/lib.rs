//! Tree-shaped quantitative bipolar argumentation frameworks (QBAFs) and
//! their gradual semantics.
//!
//! A [`Qbaf`] is a claim (the root) together with attackers and supporters,
//! each carrying a base score in `[0, 1]`. Trees are at most two levels
//! deep below the claim. [`semantics::evaluate`] computes the final strength
//! of every argument under DF-QuAD, Euler-based or Quadratic Energy
//! semantics; [`semantics::evaluate_iterative`] computes the same values by
//! synchronous fixed-point iteration and serves as a cross-check.
//!
//! The crate is `no_std` and only needs `alloc`. The `serde` feature adds
//! string (de)serialisation for ids, polarities and semantics names.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
mod id;
mod qbaf;
#[cfg(feature = "serde")]
mod serde_impls;
pub mod semantics;
mod validate;

pub use error::QbafError;
pub use id::ArgumentId;
pub use qbaf::{Argument, Edge, NewArgument, Polarity, Provenance, Qbaf, ScoreOrigin, MAX_DEPTH, MAX_TEXT_CHARS};
pub use semantics::{Convergence, Semantics, SemanticsError, StrengthMap};
pub use validate::{ValidationReport, Violation, ViolationKind};
