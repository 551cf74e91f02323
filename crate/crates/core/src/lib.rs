// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod cvae;
pub mod data;
pub mod error;
pub mod kde;
pub mod metrics;
pub mod neighbors;
pub mod nn;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod tree;
