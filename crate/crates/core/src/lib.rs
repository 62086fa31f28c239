// Negated comparisons are used on purpose so that NaN falls into the
// rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod cohort;
pub mod diagnostics;
pub mod error;
pub mod evidence;
pub mod harness;
pub mod naive;
pub mod rng;

pub use error::{Error, Result};
