//! Detection and analysis of disagreement citances in scientific full text.
//!
//! The pipeline runs in stages: [`ingest`] loads a JSON Lines corpus and
//! extracts citing sentences, [`catalog`] holds the cue-phrase queries,
//! [`matching`] executes them, [`validation`] scores manual annotations of
//! sampled matches and gates queries, and [`analytics`] aggregates flagged
//! citances into rate and impact reports. [`pipeline`] wires the stages to
//! files for the command-line driver.

pub mod analytics;
pub mod catalog;
pub mod ingest;
pub mod matching;
pub mod pipeline;
pub mod table;
pub mod validation;
