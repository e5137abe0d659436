//! Core engine for factuality assessment of long-form language model
//! responses.
//!
//! The crate models a response as a set of atomic claims ("atoms") linked to
//! retrieved evidence passages ("contexts") through entailment and
//! contradiction relations. The resulting factor graph over Boolean variables
//! is solved either exactly (bucket-tree elimination) or approximately
//! (weighted mini-buckets with a configurable i-bound), yielding a posterior
//! truthfulness marginal per atom. Downstream, [`metrics`] turns those
//! marginals into response-level factuality scores.
//!
//! The crate is `no_std`-compatible (it requires `alloc`); all IO, network
//! clients, and file formats live in the companion `veracity` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod builder;
pub mod graph;
pub mod inference;
pub mod metrics;

pub use builder::{
    build_model, contradiction_factor, entailment_factor, label_atoms, merge_duplicate_contexts,
    AtomLabel, AtomRecord, BuildError, ContextRecord, PriorConfig, RelationKind, RelationRecord,
    TIE_TOLERANCE,
};
pub use graph::{
    Factor, GraphicalModel, MarginalTable, ModelError, VarKind, Variable, VariableId,
    ENUMERATION_LIMIT,
};
pub use inference::{
    exact_marginals, induced_width, min_fill_order, wmb_marginals, EliminationOrder,
    InferenceConfig, InferenceMode, DEFAULT_IBOUND,
};
pub use metrics::{
    aggregate, build_report, comprehensiveness, f1_at_k, gain_report, median_k, precision,
    recall_at_k, relative_gain, supported_count, verifiability, AggregateSummary, FactualityReport,
    GainReport, MetricError, MetricStats,
};

