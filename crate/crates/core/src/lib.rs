//! Toolkit for running metric validation studies on natural language
//! generation outputs.
//!
//! The pipeline mirrors how a study is actually conducted:
//!
//! 1. [`corpus`] loads the test set, the aligned system outputs and optional
//!    per-system metadata.
//! 2. [`judgments`] standardizes raw crowdsourced judgments per worker and
//!    averages them into segment- and system-level DA scores.
//! 3. [`metrics`] computes baseline scores (sentence/corpus BLEU, chrF) and
//!    ingests external metric scores.
//! 4. [`correlation`] measures agreement between metric and DA scores.
//! 5. [`significance`] runs the r = 0 test, the Williams test and derives the
//!    winner set.
//! 6. [`analysis`] produces the diagnostic reports: tertile bins, conditional
//!    distributions, failure cases, grouped correlations and Kendall
//!    agreement.
//!
//! [`study`] wires all of it together behind a declarative configuration and
//! [`report`] writes the resulting bundle to disk.

pub mod analysis;
pub mod corpus;
pub mod correlation;
mod error;
mod finding;
pub mod judgments;
pub mod metrics;
pub mod report;
pub mod significance;
pub mod study;

pub use error::{Error, Result};
pub use finding::{Finding, Severity};
