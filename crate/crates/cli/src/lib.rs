//! Sweep orchestration and analysis front end: TOML manifests in,
//! line-delimited JSON records out, plus the analysis subcommands.

// NaN fields in a manifest must fail validation, hence `!(x > y)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod commands;
pub mod manifest;
pub mod records;
pub mod runner;

pub use commands::main_with_args;
