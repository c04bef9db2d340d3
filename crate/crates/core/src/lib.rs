//! Exact simulation of fractional, bifractional, trifractional and n-th order
//! fractional Brownian motions, Baxter-type variation statistics, and
//! singularity-based discrimination between candidate Hurst indices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod numeric;
pub mod sampler;
pub mod singularity;
pub mod variation;

pub use error::{Error, Result};
pub use kernels::ProcessSpec;
pub use sampler::{Grid, PathSample, Sampler};
