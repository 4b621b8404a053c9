//! Batch front end: long-format CSV ingest, run configuration and the
//! orchestration behind the `dsfda` subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ingest;
pub mod run;

pub use config::RunConfig;
pub use ingest::{ingest, write_long_csv, GroupedDataset, IngestOptions};
