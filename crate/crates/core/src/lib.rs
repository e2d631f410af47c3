//! Program-guided claim verification.
//!
//! The pipeline turns a claim into a small reasoning program via an LLM,
//! executes that program against three atomic functions (BM25 retrieval,
//! question answering, verification), and reads the claim's boolean label
//! off the program's `final_prediction` variable. A bootstrapping loop
//! critiques failed runs, refines the decomposition / information-gathering
//! strategy texts that steer generation, and selects few-shot demonstration
//! sets by pool-level macro F1.
//!
//! Modules:
//! - [`corpus`] — documents, BM25 index, top-k retrieval, recall accounting
//! - [`gateway`] — role-configured model calls over HTTP or a scripted double
//! - [`atomic`] — the retrieve / question / verify primitives
//! - [`dsl`] — extraction, parsing, validation, and printing of programs
//! - [`executor`] — sandboxed program execution with trace recording
//! - [`strategy`] — strategy texts and generation-prompt rendering
//! - [`bootstrap`] — critique-refine loop and demonstration bootstrapping
//! - [`eval`] — dataset loading, macro F1, balanced accuracy, recall

pub mod atomic;
pub mod bootstrap;
pub mod corpus;
pub mod dsl;
pub mod eval;
pub mod executor;
pub mod gateway;
pub mod strategy;

mod template;
