//! Synthetic micro-randomized trials and replicated estimation experiments.

mod generate;
mod presets;
mod replicate;

pub use generate::{
    generate_trial, generate_with, true_marginal_effect, GenerativeConfig, MarginalEffect, MODERATOR_COLUMN,
    PROBABILITY_COLUMN,
};
pub use presets::{correlation_analyses, moderation_analyses, numerator_analyses, Overrides, Preset, ScenarioGroup};
pub use replicate::{
    run_replications, summarize, EstimatorSummary, ReplicateEstimate, ReplicationReport, SimOptions, CSV_HEADER,
};
