//! Post-analysis of hooked-API event traces from mobile apps.
//!
//! The pipeline reads a trace of PII accesses, hash/encryption calls,
//! network transmissions and pasteboard operations, finds PII values in
//! outgoing payloads (also after recorded hashing or encryption), classifies
//! the receiving servers and aggregates the results into per-identifier
//! statistics. A trace synthesizer and a network-interception baseline are
//! included for evaluation.

pub mod analyzer;
pub mod baseline;
pub mod catalog;
pub mod cross_app;
pub mod docs;
pub mod error;
pub mod matcher;
pub mod party;
pub mod report;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};

/// Version string written into every output document.
pub const TOOL_VERSION: &str = concat!("scrutinator ", env!("CARGO_PKG_VERSION"));
