use super::rollout::{relabel, StreamBundle};
use super::select::{score_all, select, Payload, TdEvaluator};
use crate::domain::{Granularity, HindsightConfig, ReplayBuffer, Trajectory, Transition};
use crate::envs::Env;
use crate::error::Result;
use crate::scalar::Scalar;

/// Relabeled trajectories waiting for the next insertion round, tagged
/// with their stream index. Cleared by every round.
#[derive(Clone, Debug, Default)]
pub struct PendingHindsight<S> {
    pub entries: Vec<(usize, Trajectory<S>)>,
}

impl<S> PendingHindsight<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct InsertOutcome<S> {
    /// Hindsight items inserted: trajectories at episode granularity,
    /// transitions at transition granularity.
    pub inserted: usize,
    /// Hindsight transitions inserted.
    pub transitions: usize,
    /// The inserted trajectories (episode granularity only).
    pub trajectories: Vec<Trajectory<S>>,
    /// Whether this call ran an insertion round.
    pub round: bool,
}

/// Standard replay of the main trajectory, then hindsight accumulation.
/// Every `insert_every`-th episode the accumulated candidates are scored
/// with one learner snapshot, selected, and inserted.
#[allow(clippy::too_many_arguments)]
pub fn his_insert<S: Scalar>(
    buffer: &mut ReplayBuffer<Transition<S>>,
    bundle: &StreamBundle<S>,
    env: &Env<S>,
    config: &HindsightConfig,
    learner: Option<&dyn TdEvaluator<S>>,
    episode_index: u64,
    pending: &mut PendingHindsight<S>,
) -> Result<InsertOutcome<S>> {
    buffer.extend(bundle.main.transitions.iter().cloned());
    if !config.enabled() {
        return Ok(InsertOutcome::default());
    }
    for m in 0..bundle.streams.len() {
        let traj = relabel(bundle, env, m)?;
        if !traj.is_empty() {
            pending.entries.push((m, traj));
        }
    }
    if (episode_index + 1) % config.insert_every as u64 != 0 {
        return Ok(InsertOutcome::default());
    }
    let entries = std::mem::take(&mut pending.entries);
    let payloads: Vec<(usize, Payload<S>)> = match config.granularity() {
        Granularity::Episode => entries.into_iter().map(|(m, t)| (m, Payload::Trajectory(t))).collect(),
        Granularity::Transition => entries
            .into_iter()
            .flat_map(|(m, t)| t.transitions.into_iter().map(move |tr| (m, Payload::Transition(tr))))
            .collect(),
    };
    let scored = score_all(payloads, config.criterion, learner)?;
    let chosen = select(scored, config.threshold, config.cap);
    let mut out = InsertOutcome {
        inserted: chosen.len(),
        round: true,
        ..InsertOutcome::default()
    };
    for c in chosen {
        match c.payload {
            Payload::Transition(tr) => {
                out.transitions += 1;
                buffer.insert(tr);
            }
            Payload::Trajectory(t) => {
                out.transitions += t.len();
                buffer.extend(t.transitions.iter().cloned());
                out.trajectories.push(t);
            }
        }
    }
    Ok(out)
}
