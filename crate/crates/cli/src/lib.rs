//! File formats, experiment configs and subcommand plumbing for the
//! `reidtrack` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod runner;
pub mod source;

pub use config::{parse_sweep, parse_text, Assignment, Preset, RunConfig};
pub use runner::{sweep, track, write_run, write_sweep_csv, SweepRow};
pub use source::{write_scenario_dir, FileSource};
