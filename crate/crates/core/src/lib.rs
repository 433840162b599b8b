//! Exact-rational kernel for metric and normed-space presentations: computable
//! reals, dense-sequence spaces, norm-labelled formula spaces, limit and
//! accumulation operators, a distance-driven retraction, a universal rational
//! metric space, and a small internal program calculus.

pub mod creal;
pub mod enumerate;
pub mod error;
pub mod internal;
pub mod normlab;
pub mod operators;
pub mod qvec;
pub mod rat;
pub mod retraction;
pub mod spaces;
pub mod urysohn;

/// Crate version, embedded into CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use creal::{monotone_inverse, soft_compare, CReal, SoftOrd};
pub use error::{Error, Result};
pub use qvec::QVec;
pub use rat::Rat;
