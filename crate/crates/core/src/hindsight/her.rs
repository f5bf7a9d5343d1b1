//! Goal relabeling of goal-conditioned trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Provenance, Trajectory, Transition};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::rng::LabRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalStrategy {
    /// A state strictly later in the same episode.
    Future,
    /// The last state of the episode.
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HerConfig {
    pub n_sampled_goal: usize,
    #[serde(default = "default_strategy", rename = "goal_selection_strategy")]
    pub strategy: GoalStrategy,
}

fn default_strategy() -> GoalStrategy {
    GoalStrategy::Future
}

impl HerConfig {
    pub fn future(n_sampled_goal: usize) -> Self {
        Self {
            n_sampled_goal,
            strategy: GoalStrategy::Future,
        }
    }
}

/// For transition `t`, `n` relabeled copies whose goal is the achieved goal
/// at a state index drawn from `t+1 ..= len`. Output is ordered by source
/// transition, then by draw, so it has exactly `n * len` entries.
pub fn her_relabel<S: Scalar>(
    trajectory: &Trajectory<S>,
    n_sampled_goal: usize,
    strategy: GoalStrategy,
    env: &Env<S>,
    rng: &mut LabRng,
) -> Result<Vec<Transition<S>>> {
    if !env.spec().goal_conditioned() {
        return Err(Error::Config(format!("{} has no goal to relabel", env.id())));
    }
    let trs = &trajectory.transitions;
    let len = trs.len();
    // State index k > 0 is the successor state of transition k - 1.
    let achieved = |k: usize| env.achieved_goal(&trs[k - 1].next_state.virt);
    let mut out = Vec::with_capacity(n_sampled_goal * len);
    for (t, tr) in trs.iter().enumerate() {
        for _ in 0..n_sampled_goal {
            let k = match strategy {
                GoalStrategy::Future => rng.random_range(t + 1..=len),
                GoalStrategy::Final => len,
            };
            let goal = achieved(k);
            let mut state = tr.state.clone();
            let mut next_state = tr.next_state.clone();
            state.goal = Some(goal.clone());
            next_state.goal = Some(goal);
            let reward = env.reward(&state, &tr.action, &next_state);
            let terminal = env.terminal(&next_state);
            out.push(Transition {
                state,
                action: tr.action.clone(),
                reward,
                next_state,
                terminal,
                provenance: match tr.provenance {
                    Provenance::HiS | Provenance::HiSHER => Provenance::HiSHER,
                    _ => Provenance::HER,
                },
            });
        }
    }
    Ok(out)
}

/// Regroups HER output into `n` trajectories, the `k`-th holding the `k`-th
/// draw for every source transition.
pub fn her_trajectories<S: Scalar>(
    source: &Trajectory<S>,
    relabeled: &[Transition<S>],
    n: usize,
) -> Vec<Trajectory<S>> {
    (0..n)
        .map(|k| Trajectory {
            transitions: relabeled.iter().skip(k).step_by(n.max(1)).cloned().collect(),
            contact_time: source.contact_time,
            episode_seed: source.episode_seed,
            main_source_id: source.main_source_id,
        })
        .collect()
}
