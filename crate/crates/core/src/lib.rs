//! Function-level V8 bytecode analysis toolkit.
//!
//! The pipeline runs in three stages: parse instrumented-engine bytecode
//! logs and execution traces, label functions as fingerprinting via trace
//! heuristics, then train classifiers on the labeled opcode sequences and
//! emit pre-execution signatures for on-device matching.
//!
//! Modules follow the data flow:
//!
//! - [`bytelog`] — bytecode log parsing, opcode vocabulary, tokenization
//! - [`traces`] — execution-trace ingestion, filtering, per-function grouping
//! - [`labeler`] — fingerprinting heuristics over function traces
//! - [`dataset`] — label joining, cleaning, balancing, train/test splits
//! - [`embed`] — static opcode embeddings (skip-gram and subword)
//! - [`nncore`] — tensors, reverse-mode gradients, Adam
//! - [`transformer`] — function- and script-level sequence classifiers
//! - [`forest`] — random-forest baseline over averaged embeddings
//! - [`metrics`] — accuracy/precision/recall and ROC/PR AUCs
//! - [`signatures`] — bytecode hashing, signature sets, compile-time matching
//! - [`syngen`] — synthetic corpus generation for end-to-end testing

pub mod bytelog;
pub mod dataset;
pub mod embed;
pub mod forest;
pub mod labeler;
pub mod metrics;
pub mod nncore;
pub mod opcodes;
pub mod seeds;
pub mod signatures;
pub mod syngen;
pub mod traces;
pub mod transformer;

pub use bytelog::{FunctionKey, FunctionRecord, Vocabulary};
pub use dataset::{Label, LabeledExample, ScriptExample, SplitSpec};
pub use labeler::{HeuristicVerdict, Technique};
pub use metrics::EvalReport;
pub use signatures::SignatureSet;
pub use traces::{FunctionTrace, TraceEvent};
