//! Query-dependent prompt evaluation and optimization from offline
//! demonstrations.
//!
//! The pipeline: grade (query, prompt, answer) logs into binary
//! demonstrations ([`corpus`]), embed queries and prompts ([`embedding`]),
//! train a gradient-boosted proxy reward model on the pairs ([`reward`]),
//! pick prompts per query with best-of-N selection and baseline policies
//! ([`policy`]), and benchmark everything with combination sweeps, oracle
//! normalization, and cost accounting ([`bench`]). A planted synthetic
//! world ([`synth`]) exercises the whole path without touching a paid
//! service; [`llm`] adapts real or mock chat backends and meters spend.

pub mod bench;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod llm;
pub mod policy;
pub mod reward;
pub mod synth;

pub use error::{Error, Result};
