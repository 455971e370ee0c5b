//! Few-shot molecular property prediction over motif-augmented context graphs.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece
//! of the pipeline:
//!
//! - [`molgraph`]: a small SMILES dialect parser, ring perception and a
//!   round-trip writer.
//! - [`motif`]: bridge-bond fragmentation, exact canonical codes and the
//!   frequency-ranked motif dictionary.
//! - [`context`]: the motif / molecule / property context graph of an episode
//!   and its propagation weights.
//! - [`autodiff`]: a dense reverse-mode tape, parameters, Adam and a
//!   finite-difference checker.
//! - [`encoders`]: the global context encoder, local-focus subgraph encoders,
//!   the structural molecule encoder and the scoring head.
//! - [`fewshot`]: datasets, episode sampling, training, evaluation and ROC-AUC.
//!
//! IO, the command-line interface and parallel evaluation live in the `mglc`
//! crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod context;
pub mod encoders;
pub mod fewshot;
pub mod molgraph;
pub mod motif;
pub mod rng;

pub use autodiff::{Adam, AdamConfig, ParamId, ParameterStore, Tape, Tensor, Var};
pub use context::{ContextGraph, EdgeLabel, GraphMode, NodeKind, NodeRef, WeightScheme};
pub use encoders::{Model, ModelConfig, Readout};
pub use fewshot::{Episode, PropertyDataset, TaskSplit};
pub use molgraph::{parse_smiles, MolecularGraph};
pub use motif::{MotifCode, MotifDictionary};
