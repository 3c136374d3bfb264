//! Outage analysis and simulation for periodic deadline-constrained
//! downlink broadcasting.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod channel;
pub mod config;
pub mod deployment;
pub mod error;
pub mod mcengine;
pub mod protocols;
pub mod report;
pub mod specfun;

pub use error::{Error, Result};
