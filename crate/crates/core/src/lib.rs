//! Wireless-powered edge computing with cooperative energy recycling:
//! channel generation, the system model, the max-min allocator, reference
//! solvers, comparison schemes and an experiment harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod cer;
pub mod channel;
pub mod error;
pub mod harness;
pub mod mfba;
pub mod oracle;
pub mod params;
pub mod seed;
pub mod specfun;
pub mod sysmodel;

pub use error::{Error, Result};
