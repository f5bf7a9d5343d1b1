//! HySR rollouts with parallel virtual streams.

use rand::seq::index;
use rand::Rng;

use crate::domain::{
    EntryView, HybridState, Mode, Provenance, RecordedDb, Terminal, Trajectory, Transition, VirtualInstance,
};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::learner::Policy;
use crate::rng::{EpisodeRngs, LabRng};
use crate::scalar::Scalar;

/// A virtual sequence an instance replays from: a recorded entry, or a
/// resting object repeated over the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamSource<S> {
    pub data: Vec<S>,
    pub source_id: u64,
}

impl<S: Scalar> StreamSource<S> {
    pub fn view(&self, dim: usize) -> EntryView<'_, S> {
        EntryView::new(&self.data, dim)
    }
}

/// One hindsight stream: the instance at every step it was alive.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream<S> {
    pub source: StreamSource<S>,
    /// `states[t]` is the instance at time `t`; `states.len() - 1` steps
    /// were taken.
    pub states: Vec<VirtualInstance<S>>,
    /// How the stream's last step ended; `NotDone` while it is alive.
    pub terminal: Terminal,
}

impl<S: Scalar> Stream<S> {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn finished(&self) -> bool {
        self.terminal.is_done()
    }

    pub fn contact_time(&self) -> Option<usize> {
        self.states.last().and_then(|s| s.contact_time)
    }
}

/// Steps taken after the main episode ended, acting on a hindsight stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tail {
    /// Stream index the policy observed at each tail step.
    pub conditioned_on: Vec<usize>,
}

impl Tail {
    pub fn len(&self) -> usize {
        self.conditioned_on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditioned_on.is_empty()
    }
}

/// A HySR episode together with its hindsight streams.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamBundle<S> {
    pub main: Trajectory<S>,
    pub goal: Option<Vec<S>>,
    /// Real states `s^r_0 ..= s^r_L` over the main episode and the tail.
    pub real_states: Vec<Vec<S>>,
    /// Actions `a_0 .. a_{L-1}`.
    pub actions: Vec<Vec<S>>,
    pub streams: Vec<Stream<S>>,
    pub tail: Tail,
}

impl<S: Scalar> StreamBundle<S> {
    pub fn main_len(&self) -> usize {
        self.main.len()
    }

    pub fn hybrid(&self, t: usize, virt: &VirtualInstance<S>) -> HybridState<S> {
        HybridState {
            real: self.real_states[t].clone(),
            virt: virt.clone(),
            goal: self.goal.clone(),
            time: t,
        }
    }

    pub fn unfinished(&self) -> impl Iterator<Item = usize> + '_ {
        self.streams
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.finished())
            .map(|(m, _)| m)
    }
}

fn observe<S: Scalar>(real: &[S], virt: &VirtualInstance<S>, goal: Option<&Vec<S>>) -> Vec<S> {
    let mut obs = Vec::with_capacity(real.len() + virt.state.len() + goal.map_or(0, Vec::len));
    obs.extend_from_slice(real);
    obs.extend_from_slice(&virt.state);
    if let Some(g) = goal {
        obs.extend_from_slice(g);
    }
    obs
}

fn start_stream<S: Scalar>(env: &Env<S>, source: StreamSource<S>) -> Stream<S> {
    let first = source.view(env.spec().virt_dim).state(0).to_vec();
    let id = source.source_id;
    Stream {
        source,
        states: vec![VirtualInstance::replay(first, id)],
        terminal: Terminal::NotDone,
    }
}

/// Advances an alive stream over step `t`.
fn advance<S: Scalar>(
    env: &Env<S>,
    stream: &mut Stream<S>,
    real: &[S],
    real_next: &[S],
    goal: Option<&Vec<S>>,
    t: usize,
) {
    debug_assert_eq!(stream.steps(), t);
    let dim = env.spec().virt_dim;
    let cur = stream.states.last().expect("streams start with one state");
    let next = env.step_virtual(real, real_next, cur, stream.source.view(dim), t);
    let next_state = HybridState {
        real: real_next.to_vec(),
        virt: next.clone(),
        goal: goal.cloned(),
        time: t + 1,
    };
    stream.terminal = env.terminal(&next_state);
    stream.states.push(next);
}

/// Draws the main virtual source and `m` stream sources.
///
/// Interception draws uniformly from the recorded database (streams without
/// replacement while `m` does not exceed its size); manipulation samples
/// fresh resting objects from the initial-object distribution.
pub fn sample_sources<S: Scalar>(
    env: &Env<S>,
    db: Option<&RecordedDb<S>>,
    m: usize,
    main_rng: &mut LabRng,
    stream_rng: &mut LabRng,
) -> Result<(StreamSource<S>, Vec<StreamSource<S>>)> {
    if env.uses_recorded_replay() {
        let db = db.filter(|d| !d.is_empty()).ok_or_else(|| {
            Error::Config(format!(
                "{} replays recorded trajectories but the database is empty",
                env.id()
            ))
        })?;
        if db.dim() != env.spec().virt_dim || db.entry_len() < env.spec().entry_len() {
            return Err(Error::Config(format!(
                "database entries ({} states of dimension {}) do not fit {}",
                db.entry_len(),
                db.dim(),
                env.id()
            )));
        }
        let source = |n: usize| StreamSource {
            data: db.entry(n).data().to_vec(),
            source_id: n as u64,
        };
        let main = source(main_rng.random_range(0..db.len()));
        let picks: Vec<usize> = if m <= db.len() {
            index::sample(stream_rng, db.len(), m).into_vec()
        } else {
            (0..m).map(|_| stream_rng.random_range(0..db.len())).collect()
        };
        Ok((main, picks.into_iter().map(source).collect()))
    } else {
        let main = StreamSource {
            data: env.sample_virtual_sequence(main_rng),
            source_id: 0,
        };
        let streams = (0..m)
            .map(|i| StreamSource {
                data: env.sample_virtual_sequence(stream_rng),
                source_id: i as u64 + 1,
            })
            .collect();
        Ok((main, streams))
    }
}

/// Rolls out one HySR episode from given sources. The policy only ever
/// sees the main instance; streams advance under the same real states.
pub fn rollout_from_sources<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    env: &Env<S>,
    main: StreamSource<S>,
    goal: Option<Vec<S>>,
    sources: Vec<StreamSource<S>>,
    policy_rng: &mut LabRng,
    episode_seed: u64,
) -> StreamBundle<S> {
    let spec = env.spec();
    let horizon = spec.horizon;
    let main_id = main.source_id;
    let mut main_stream = start_stream(env, main);
    let mut streams: Vec<Stream<S>> = sources.into_iter().map(|s| start_stream(env, s)).collect();
    let mut real_states = vec![env.initial_real()];
    let mut actions = Vec::new();
    let mut transitions = Vec::new();

    for t in 0..horizon {
        let real = real_states[t].clone();
        let virt = main_stream.states[t].clone();
        let obs = observe(&real, &virt, goal.as_ref());
        let action = env.clip_action(&policy.act(&obs, policy_rng));
        let real_next = env.step_real(&real, &action);
        advance(env, &mut main_stream, &real, &real_next, goal.as_ref(), t);
        for s in streams.iter_mut().filter(|s| !s.finished()) {
            advance(env, s, &real, &real_next, goal.as_ref(), t);
        }
        let state = HybridState {
            real,
            virt,
            goal: goal.clone(),
            time: t,
        };
        let next_state = HybridState {
            real: real_next.clone(),
            virt: main_stream.states[t + 1].clone(),
            goal: goal.clone(),
            time: t + 1,
        };
        let reward = env.reward(&state, &action, &next_state);
        transitions.push(Transition {
            state,
            action: action.clone(),
            reward,
            next_state,
            terminal: main_stream.terminal,
            provenance: Provenance::OnPolicy,
        });
        real_states.push(real_next);
        actions.push(action);
        if main_stream.finished() {
            break;
        }
    }
    StreamBundle {
        main: Trajectory {
            transitions,
            contact_time: main_stream.contact_time(),
            episode_seed,
            main_source_id: main_id,
        },
        goal,
        real_states,
        actions,
        streams,
        tail: Tail::default(),
    }
}

/// Samples sources and goal from the episode generators and rolls out.
/// The number of streams never changes the main trajectory: sources,
/// goal, and actions come from separate generators.
pub fn rollout_hysr<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    env: &Env<S>,
    db: Option<&RecordedDb<S>>,
    num_streams: usize,
    rngs: &mut EpisodeRngs,
    episode_seed: u64,
) -> Result<StreamBundle<S>> {
    let (main, sources) = sample_sources(env, db, num_streams, &mut rngs.main_virtual, &mut rngs.streams)?;
    let goal = env.sample_goal(&mut rngs.goal);
    Ok(rollout_from_sources(
        policy,
        env,
        main,
        goal,
        sources,
        &mut rngs.policy,
        episode_seed,
    ))
}

/// Keeps acting after the main episode ended while hindsight streams are
/// still alive, observing the lowest-index unfinished stream, until every
/// stream is done or the horizon is reached. Tail steps only extend
/// streams that are still alive.
pub fn continue_tail<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    env: &Env<S>,
    mut bundle: StreamBundle<S>,
    rng: &mut LabRng,
) -> StreamBundle<S> {
    let horizon = env.spec().horizon;
    loop {
        let t = bundle.actions.len();
        let Some(j) = bundle.unfinished().next() else { break };
        if t >= horizon {
            break;
        }
        let real = bundle.real_states[t].clone();
        let obs = observe(&real, &bundle.streams[j].states[t], bundle.goal.as_ref());
        let action = env.clip_action(&policy.act(&obs, rng));
        let real_next = env.step_real(&real, &action);
        let goal = bundle.goal.clone();
        for s in bundle.streams.iter_mut().filter(|s| !s.finished()) {
            advance(env, s, &real, &real_next, goal.as_ref(), t);
        }
        bundle.real_states.push(real_next);
        bundle.actions.push(action);
        bundle.tail.conditioned_on.push(j);
    }
    bundle
}

/// Stream `m` relabeled into a trajectory: real states and actions copied
/// from the bundle, virtual states from the stream, rewards and terminal
/// markers recomputed from the relabeled states.
pub fn relabel<S: Scalar>(bundle: &StreamBundle<S>, env: &Env<S>, m: usize) -> Result<Trajectory<S>> {
    let stream = bundle.streams.get(m).ok_or_else(|| {
        Error::Structural(format!(
            "stream index {m} out of range for {} streams",
            bundle.streams.len()
        ))
    })?;
    let transitions = (0..stream.steps())
        .map(|t| {
            let state = bundle.hybrid(t, &stream.states[t]);
            let next_state = bundle.hybrid(t + 1, &stream.states[t + 1]);
            let action = bundle.actions[t].clone();
            let reward = env.reward(&state, &action, &next_state);
            let terminal = env.terminal(&next_state);
            Transition {
                state,
                action,
                reward,
                next_state,
                terminal,
                provenance: Provenance::HiS,
            }
        })
        .collect();
    Ok(Trajectory {
        transitions,
        contact_time: stream.contact_time(),
        episode_seed: bundle.main.episode_seed,
        main_source_id: stream.source.source_id,
    })
}

/// Whether every stream replays before its contact and simulates after.
pub fn streams_consistent<S: Scalar>(bundle: &StreamBundle<S>) -> bool {
    bundle.streams.iter().all(|s| {
        let tc = s.contact_time();
        s.states.iter().enumerate().all(|(t, v)| {
            let expected = match tc {
                Some(c) if t > c => Mode::Simulated,
                _ => Mode::Replay,
            };
            v.mode == expected && v.is_consistent(t)
        })
    })
}
