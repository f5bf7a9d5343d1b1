//! Criterion scoring and threshold/top-k selection.

use crate::domain::{Criterion, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::learner::Sac;
use crate::scalar::Scalar;

/// Source of TD errors for scoring; a read-only view of the learner.
pub trait TdEvaluator<S> {
    fn td_errors(&self, transitions: &[&Transition<S>]) -> Result<Vec<S>>;
}

impl<S: Scalar> TdEvaluator<S> for Sac<S> {
    fn td_errors(&self, transitions: &[&Transition<S>]) -> Result<Vec<S>> {
        let batch = self.batch(transitions);
        Ok(Sac::td_errors(self, &batch).to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload<S> {
    Transition(Transition<S>),
    Trajectory(Trajectory<S>),
}

impl<S: Scalar> Payload<S> {
    pub fn transitions(&self) -> &[Transition<S>] {
        match self {
            Payload::Transition(t) => std::slice::from_ref(t),
            Payload::Trajectory(t) => &t.transitions,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate<S> {
    pub payload: Payload<S>,
    pub score: S,
    pub criterion: Criterion,
    pub stream_index: usize,
}

fn need_learner<'a, S>(
    criterion: Criterion,
    learner: Option<&'a dyn TdEvaluator<S>>,
) -> Result<&'a dyn TdEvaluator<S>> {
    learner.ok_or_else(|| Error::Precondition(format!("criterion {} needs an initialised learner", criterion.as_str())))
}

/// Score of one payload under `criterion`. Transition criteria take the
/// single transition of a transition payload; episode criteria sum over a
/// trajectory payload (undiscounted).
pub fn score<S: Scalar>(payload: &Payload<S>, criterion: Criterion, learner: Option<&dyn TdEvaluator<S>>) -> Result<S> {
    let trs = payload.transitions();
    Ok(match criterion {
        Criterion::RewardPerTransition | Criterion::RewardPerEpisode => trs.iter().map(|t| t.reward).sum(),
        Criterion::TdPerTransition | Criterion::TdPerEpisode => {
            let refs: Vec<&Transition<S>> = trs.iter().collect();
            need_learner(criterion, learner)?
                .td_errors(&refs)?
                .iter()
                .map(|d| d.abs())
                .sum()
        }
        Criterion::VirtualDisplacement => match payload {
            Payload::Trajectory(t) => t.virtual_displacement(),
            Payload::Transition(t) => Trajectory {
                transitions: vec![t.clone()],
                contact_time: None,
                episode_seed: 0,
                main_source_id: 0,
            }
            .virtual_displacement(),
        },
    })
}

/// Scores many payloads, batching all TD evaluations into one learner call
/// so a round uses a single parameter snapshot.
pub fn score_all<S: Scalar>(
    payloads: Vec<(usize, Payload<S>)>,
    criterion: Criterion,
    learner: Option<&dyn TdEvaluator<S>>,
) -> Result<Vec<ScoredCandidate<S>>> {
    let scores: Vec<S> = if criterion.needs_learner() {
        let learner = need_learner(criterion, learner)?;
        let refs: Vec<&Transition<S>> = payloads.iter().flat_map(|(_, p)| p.transitions()).collect();
        let deltas = learner.td_errors(&refs)?;
        let mut it = deltas.into_iter();
        payloads
            .iter()
            .map(|(_, p)| it.by_ref().take(p.transitions().len()).map(|d| d.abs()).sum())
            .collect()
    } else {
        payloads
            .iter()
            .map(|(_, p)| score(p, criterion, None))
            .collect::<Result<_>>()?
    };
    Ok(payloads
        .into_iter()
        .zip(scores)
        .map(|((stream_index, payload), score)| ScoredCandidate {
            payload,
            score,
            criterion,
            stream_index,
        })
        .collect())
}

/// Keeps candidates scoring strictly above `threshold`, best first, at most
/// `cap` of them. Equal scores go to the lower stream index, then to the
/// earlier candidate. Non-finite scores are never selected.
pub fn select<S: Scalar>(candidates: Vec<ScoredCandidate<S>>, threshold: f64, cap: usize) -> Vec<ScoredCandidate<S>> {
    if cap == 0 {
        return Vec::new();
    }
    let mut kept: Vec<ScoredCandidate<S>> = candidates
        .into_iter()
        .filter(|c| {
            if !c.score.is_finite() {
                log::warn!(
                    "dropping candidate from stream {} with non-finite score",
                    c.stream_index
                );
                return false;
            }
            c.score.as_f64() > threshold
        })
        .collect();
    kept.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then(a.stream_index.cmp(&b.stream_index))
    });
    kept.truncate(cap);
    kept
}
