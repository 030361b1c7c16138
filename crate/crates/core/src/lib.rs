// Negated float comparisons deliberately treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod maddpg;
pub mod numerics;
pub mod optimizer;
pub mod parallel;
pub mod report;
pub mod signal;

pub use error::{Error, Result};
