//! Shared test support: synthetic scenes, an independent dense-matrix oracle
//! for the leaky process, and small statistics helpers.
//!
//! The oracle deliberately re-derives the redistribution semantics from the
//! weight lists with plain dense arithmetic; it shares no code with the
//! sparse implementation it checks.

pub mod fixtures;
pub mod oracle;
pub mod stats;
