//! Knowledge-driven imputation of missing AIS trajectory segments.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod ais;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod imputation;
pub mod method;
pub mod oracle;
pub mod sdkg;
pub mod workflow;

pub use error::{Error, Result};
