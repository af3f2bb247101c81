//! Deterministic simulation of attacks on an agentic driving pipeline.

pub mod cav;
pub mod chain;
pub mod cli;
pub mod domain;
pub mod harness;
pub mod pipeline;
pub mod severity;
pub mod threats;
pub mod trace;
