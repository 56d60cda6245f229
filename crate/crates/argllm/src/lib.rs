//! Argumentative decision support: LLM-built argumentation trees whose
//! verdict people can contest and revise.
//!
//! The numerical core (tree model and gradual semantics) lives in
//! [`argllm_core`]; this crate adds the model gateway, tree builder, PDF
//! ingestion, the HTTP session service, file formats and the CLI.

pub mod builder;
pub mod cli;
pub mod format;
pub mod gateway;
pub mod ingest;
pub mod service;

pub use argllm_core as core;
