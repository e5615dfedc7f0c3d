//! Core of the questionnaire rig: experiment configuration, prompt
//! construction, response postprocessing, judging, scoring and statistics.
//! Everything here is synchronous and deterministic; talking to models
//! lives in the runner crate.

pub mod analysis;
pub mod clean;
pub mod config;
pub mod export;
pub mod judge;
pub mod judge_data;
pub mod persona;
pub mod pipeline;
pub mod plan;
pub mod prompt;
pub mod questionnaire;
pub mod record;
pub mod scoring;
pub mod stats;
pub mod validity;
