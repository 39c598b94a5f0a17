//! Cross-ecosystem malicious package detection for npm and PyPI.
//!
//! The pipeline turns package archives into a fixed-order vector of
//! language-independent lexical and structural features, trains tree
//! learners (CART, random forest, second-order gradient boosting) on
//! labeled corpora, and scans registry feeds for suspicious uploads.
//!
//! Module map:
//!
//! - [`ingest`]: archive opening with traversal and bomb protection, file roles
//! - [`lexing`]: best-effort tokenizers for JavaScript, Python and `package.json`
//! - [`features`]: GL4 entropy statistics, sensitive string counters, the schema
//! - [`dataset`]: labeled corpora, de-duplication, the 90/10 assembly
//! - [`models`]: tree learners and the portable model file
//! - [`tuning`]: stratified repeated k-fold CV, metrics, hyperparameter search
//! - [`scanner`]: feed polling, downloads, verdicts, the watch loop
//! - [`synth`]: seeded synthetic package generator used by the experiment harness

pub mod dataset;
pub mod features;
pub mod ingest;
pub mod lexing;
pub mod models;
pub mod scanner;
pub mod stats;
pub mod synth;
pub mod tuning;

mod ecosystem;

pub use ecosystem::{Ecosystem, ParseEcosystemError};
