//! Configuration, file formats and pipeline for `bosegas-core` runs.
//!
//! A run is described by a JSON [`config::RunConfig`] and executed stage by
//! stage (`hartree`, `assemble`, `solve`, `decay`, `certify`, `lemmas`,
//! `coulomb-split`). Each stage writes its files into the run's output
//! directory together with a record of its input hash, so reruns skip
//! unchanged work. A `manifest.json` lists every produced file with its
//! SHA-256 checksum.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{LabError, Result};
pub use pipeline::{Run, RunManifest, RunOptions, Stage};
