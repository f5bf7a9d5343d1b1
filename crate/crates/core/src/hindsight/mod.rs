//! Hindsight states: parallel virtual streams, relabeling, scoring,
//! selection, and goal relabeling.

mod her;
mod insert;
mod rollout;
mod select;

#[cfg(test)]
mod tests;

pub use her::{her_relabel, her_trajectories, GoalStrategy, HerConfig};
pub use insert::{his_insert, InsertOutcome, PendingHindsight};
pub use rollout::{
    continue_tail, relabel, rollout_from_sources, rollout_hysr, sample_sources, streams_consistent, Stream,
    StreamBundle, StreamSource, Tail,
};
pub use select::{score, score_all, select, Payload, ScoredCandidate, TdEvaluator};
