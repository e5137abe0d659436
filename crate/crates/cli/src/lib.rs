//! Offline-testable factuality assessment and correction of long-form
//! language-model answers.
//!
//! This crate carries everything that touches the outside world: the
//! generation and search clients with record/replay caching ([`llm`]), the
//! prompt templates and their renderers ([`prompts`]), JSONL dataset
//! handling ([`dataset`]), the assessment pipeline and iterative correction
//! loop ([`pipeline`]), reference-equivalence judging ([`judge`]), the
//! benchmark harness and its run artifacts ([`bench`]), and declarative
//! replay-store scripting for tests and offline runs ([`fixtures`]).
//!
//! The factor-graph model, inference engines, and factuality metrics live
//! in the `veracity-core` crate, which this crate re-exports as
//! [`core`](veracity_core).

pub use veracity_core as core;

pub mod bench;
pub mod dataset;
pub mod fixtures;
pub mod judge;
pub mod llm;
pub mod pipeline;
pub mod prompts;
