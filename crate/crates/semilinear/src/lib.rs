//! Problem files, reports and the command line for `semilinear-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod problem;
pub mod report;

pub use semilinear_core;
