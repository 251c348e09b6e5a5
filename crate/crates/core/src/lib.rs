//! Decision-QA benchmark engine.
//!
//! Generates decision-making benchmark instances with deterministic economic
//! simulators, annotates the ground-truth best decision by exhaustive
//! simulation, runs retrieval-augmented agent strategies over an embedded
//! queryable database, and scores the resulting transcripts.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`model`] — the two scenario databases (trade network / goods market)
//!   with validation and equivalent tabular and graph views
//! - [`locating`] — trade-flow simulator (merchant placement decisions)
//! - [`building`] — supply/demand price simulator (factory expansion decisions)
//! - [`oracle`] — candidate enumeration and gold-answer annotation
//! - [`genesis`] — seeded synthetic instance generator
//! - [`query`] — the mini query language (tabular + graph dialects)
//! - [`agent`] — single-turn, iterative, and plan-then-retrieve decision
//!   makers over a pluggable LM backend
//! - [`eval`] — correctness scoring, retrieval/failure analyses, reports
//! - [`pipeline`] — file-based orchestration used by the `dqa` CLI

pub mod agent;
pub mod building;
pub mod eval;
pub mod genesis;
pub mod locating;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod query;
