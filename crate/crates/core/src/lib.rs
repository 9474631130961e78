//! Per-type active-node cardinality estimation for heterogeneous M2M networks.

pub mod analysis;
pub mod config;
pub mod decode;
pub mod error;
pub mod frame;
pub mod harness;
pub mod homogeneous;
pub mod hsrc;
pub mod ledger;
pub mod model;
pub mod rng;
pub mod three_stage;
pub mod two_stage;

pub use error::{Error, Result};
