//! Causal failure attribution for multi-agent execution traces.
//!
//! Given a failed run, the crate answers two questions: which agent is
//! responsible (`Who`) and which step is decisive (`When`). Agents are scored
//! with Shapley values over a structural causal model fitted on the
//! performance causal graph; steps are ranked by context-conditioned causal
//! discovery, counterfactual step interventions and bootstrap stability.

pub mod bottleneck;
pub mod cdc;
pub mod config;
pub mod error;
pub mod features;
pub mod graph;
pub mod pipeline;
pub mod ranking;
pub mod report;
pub mod scm;
pub mod shapley;
pub mod stats;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
