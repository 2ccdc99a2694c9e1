//! Repeat-victimization risk modelling for domestic-violence case data.
//!
//! The crate covers the full offline pipeline: synthetic case generation,
//! preprocessing into categorical feature frames, a from-scratch random
//! forest trained inside a balanced-resampling two-level ensemble,
//! evaluation and rank statistics, and village-level aggregation for the
//! risk map.

pub mod preprocess;
pub mod forest;
pub mod metrics;
pub mod geo;
pub mod synthgen;
pub mod pipeline;
