//! Files, experiments and the command-line interface around [`mglc_core`].
//!
//! Formats: dataset CSV ([`dataset`]), SMILES corpora ([`corpus`]), motif
//! dictionaries ([`dictionary`]), run configs ([`config`]), checkpoints
//! ([`checkpoint`]), evaluation reports ([`report`]), CSV exports
//! ([`export`]) and output manifests ([`manifest`]).

pub mod bundled;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod export;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
pub use mglc_core as core;
