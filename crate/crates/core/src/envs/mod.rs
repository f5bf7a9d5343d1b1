//! Deterministic desk-scale environments that satisfy the hybrid
//! sim-and-real factorisation: the real part evolves from its own state and
//! the action only, the virtual part is replayed from a recording until the
//! first contact and simulated afterwards.

mod manip;
pub mod params;
mod volley;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EntryView, EnvId, HybridState, Layout, RecordedDb, Terminal, Trajectory, VirtualInstance};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};
use crate::scalar::Scalar;

pub use params::{ManipParams, VolleyParams};

use manip::Object;

/// Default displacement below which an episode counts as trivial.
pub const DEFAULT_MOVE_THRESHOLD: f64 = 1e-3;

/// Environment selection plus parameter overrides, as found in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub id: EnvId,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, serde_json::Value>,
}

impl EnvConfig {
    pub fn new(id: EnvId) -> Self {
        Self {
            id,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.overrides.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec<S> {
    pub env_id: EnvId,
    pub real_dim: usize,
    pub virt_dim: usize,
    pub action_dim: usize,
    pub goal_dim: Option<usize>,
    /// Maximum number of steps per episode.
    pub horizon: usize,
    pub action_low: Vec<S>,
    pub action_high: Vec<S>,
    pub success_radius: S,
    pub dt: S,
    /// Per-component factors that bring observations to order one; a
    /// learner may multiply its inputs by these.
    pub obs_scale: Vec<S>,
}

impl<S: Scalar> EnvSpec<S> {
    pub fn layout(&self) -> Layout {
        Layout {
            real: self.real_dim,
            virt: self.virt_dim,
            goal: self.goal_dim,
        }
    }

    pub fn goal_conditioned(&self) -> bool {
        self.goal_dim.is_some()
    }

    pub fn observation_dim(&self) -> usize {
        self.layout().observation_dim()
    }

    /// States per recorded entry: one per step plus the initial state.
    pub fn entry_len(&self) -> usize {
        self.horizon + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Dynamics {
    Volley(VolleyParams),
    Manip(ManipParams, Object),
}

/// A fully specified environment. Stepping is pure; one `Env` can drive any
/// number of episodes and streams concurrently.
#[derive(Clone, Debug, PartialEq)]
pub struct Env<S> {
    spec: EnvSpec<S>,
    dynamics: Dynamics,
}

/// Builds an environment from its id and parameter overrides.
pub fn make_env<S: Scalar>(config: &EnvConfig) -> Result<Env<S>> {
    let dynamics = match config.id {
        EnvId::Volley2d => Dynamics::Volley(params::apply_overrides(VolleyParams::default(), &config.overrides)?),
        EnvId::Pushbox2d => Dynamics::Manip(
            params::apply_overrides(ManipParams::push(), &config.overrides)?,
            Object::Box,
        ),
        EnvId::Slidedisk2d => Dynamics::Manip(
            params::apply_overrides(ManipParams::slide(), &config.overrides)?,
            Object::Disk,
        ),
    };
    let spec = match &dynamics {
        Dynamics::Volley(p) => {
            if p.max_steps == 0 || p.dt <= 0.0 || p.lag_tau <= 0.0 || p.success_radius <= 0.0 || p.gravity <= 0.0 {
                return Err(Error::Config("volley2d parameters out of range".into()));
            }
            EnvSpec {
                env_id: config.id,
                real_dim: volley::REAL_DIM,
                virt_dim: volley::VIRT_DIM,
                action_dim: 1,
                goal_dim: None,
                horizon: p.max_steps,
                action_low: vec![-S::one()],
                action_high: vec![S::one()],
                success_radius: S::lit(p.success_radius),
                dt: S::lit(p.dt),
                obs_scale: volley::obs_scale(p),
            }
        }
        Dynamics::Manip(p, object) => {
            if p.horizon == 0 || p.dt <= 0.0 || p.success_radius <= 0.0 || p.speed_cap <= 0.0 {
                return Err(Error::Config(format!("{} parameters out of range", config.id)));
            }
            EnvSpec {
                env_id: config.id,
                real_dim: manip::REAL_DIM,
                virt_dim: object.virt_dim(),
                action_dim: 2,
                goal_dim: Some(manip::GOAL_DIM),
                horizon: p.horizon,
                action_low: vec![-S::one(); 2],
                action_high: vec![S::one(); 2],
                success_radius: S::lit(p.success_radius),
                dt: S::lit(p.dt),
                obs_scale: manip::obs_scale(p, *object),
            }
        }
    };
    Ok(Env { spec, dynamics })
}

impl<S: Scalar> Env<S> {
    pub fn spec(&self) -> &EnvSpec<S> {
        &self.spec
    }

    pub fn id(&self) -> EnvId {
        self.spec.env_id
    }

    pub fn volley_params(&self) -> Option<&VolleyParams> {
        match &self.dynamics {
            Dynamics::Volley(p) => Some(p),
            Dynamics::Manip(..) => None,
        }
    }

    pub fn manip_params(&self) -> Option<&ManipParams> {
        match &self.dynamics {
            Dynamics::Manip(p, _) => Some(p),
            Dynamics::Volley(_) => None,
        }
    }

    /// Whether rollouts draw the main virtual sequence from a recorded
    /// database (interception) or sample it fresh (manipulation).
    pub fn uses_recorded_replay(&self) -> bool {
        matches!(self.dynamics, Dynamics::Volley(_))
    }

    /// Whether a hindsight stream may outlive the main episode.
    pub fn has_variable_length(&self) -> bool {
        self.uses_recorded_replay()
    }

    pub fn initial_real(&self) -> Vec<S> {
        match &self.dynamics {
            Dynamics::Volley(p) => volley::initial_real(p),
            Dynamics::Manip(p, _) => manip::initial_real(p),
        }
    }

    pub fn sample_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<S>> {
        match &self.dynamics {
            Dynamics::Volley(_) => None,
            Dynamics::Manip(p, _) => Some(manip::sample_goal(p, rng)),
        }
    }

    /// One virtual sequence of `entry_len` states, flat: a ballistic
    /// flight for the interception task, a resting object otherwise.
    pub fn sample_virtual_sequence<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        match &self.dynamics {
            Dynamics::Volley(p) => volley::sample_ball_sequence(p, self.spec.horizon, rng),
            Dynamics::Manip(p, object) => {
                let pose: Vec<S> = manip::sample_object(p, *object, rng);
                pose.iter()
                    .copied()
                    .cycle()
                    .take(pose.len() * self.spec.entry_len())
                    .collect()
            }
        }
    }

    /// Clips `action` to the bounds. Out-of-bound actions are not an error.
    pub fn clip_action(&self, action: &[S]) -> Vec<S> {
        action
            .iter()
            .zip(self.spec.action_low.iter().zip(&self.spec.action_high))
            .map(|(&a, (&lo, &hi))| {
                let c = a.max(lo).min(hi);
                if c != a {
                    log::trace!("clipped action component {a} to {c}");
                }
                c
            })
            .collect()
    }

    /// Advances the real part. Depends on nothing but `real` and `action`.
    pub fn step_real(&self, real: &[S], action: &[S]) -> Vec<S> {
        let action = self.clip_action(action);
        match &self.dynamics {
            Dynamics::Volley(p) => volley::step_real(p, real, &action),
            Dynamics::Manip(p, _) => manip::step_real(p, real, &action),
        }
    }

    /// Advances one virtual instance over step `t`, given the real state
    /// before and after the step. Replays `entry[t + 1]` until contact is
    /// first detected at step end, then simulates.
    pub fn step_virtual(
        &self,
        real: &[S],
        real_next: &[S],
        inst: &VirtualInstance<S>,
        entry: EntryView<'_, S>,
        t: usize,
    ) -> VirtualInstance<S> {
        match &self.dynamics {
            Dynamics::Volley(p) => volley::step_virtual(p, real, real_next, inst, entry, t),
            Dynamics::Manip(p, object) => manip::step_virtual(p, *object, real, real_next, inst, entry, t),
        }
    }

    /// Full single-instance step.
    pub fn step(&self, state: &HybridState<S>, action: &[S], entry: EntryView<'_, S>) -> HybridState<S> {
        let real = self.step_real(&state.real, action);
        let virt = self.step_virtual(&state.real, &real, &state.virt, entry, state.time);
        HybridState {
            real,
            virt,
            goal: state.goal.clone(),
            time: state.time + 1,
        }
    }

    /// Sparse 0/1 reward; a pure function of its arguments.
    pub fn reward(&self, state: &HybridState<S>, _action: &[S], next: &HybridState<S>) -> S {
        match &self.dynamics {
            Dynamics::Volley(p) => volley::reward(p, state, next),
            Dynamics::Manip(p, _) => manip::reward(p, next),
        }
    }

    pub fn terminal(&self, next: &HybridState<S>) -> Terminal {
        match &self.dynamics {
            Dynamics::Volley(p) => volley::terminal(p, next),
            Dynamics::Manip(p, _) => manip::terminal(p, next),
        }
    }

    /// The goal an instance achieves: the object position.
    pub fn achieved_goal(&self, virt: &VirtualInstance<S>) -> Vec<S> {
        virt.state[..2].to_vec()
    }

    /// Landing point on the table of a free-flying ball (interception only).
    pub fn landing_x(&self, ball: &[S]) -> Option<S> {
        self.volley_params().map(|p| volley::landing_x(p, ball))
    }

    pub fn initial_state(&self, virt: VirtualInstance<S>, goal: Option<Vec<S>>) -> HybridState<S> {
        HybridState {
            real: self.initial_real(),
            virt,
            goal,
            time: 0,
        }
    }
}

/// Records `count` virtual sequences. Entry `n` depends only on
/// `(seed, n)`, so the database is a pure function of its arguments.
pub fn generate_recorded_db<S: Scalar>(env: &Env<S>, count: usize, seed: u64) -> Result<RecordedDb<S>> {
    if count == 0 {
        return Err(Error::Config("a recorded database needs at least one entry".into()));
    }
    let dim = env.spec.virt_dim;
    let entries: Vec<Vec<Vec<S>>> = (0..count)
        .map(|n| {
            let mut rng = stream_rng(seed, Purpose::RecordedDb, n as u64, 0);
            env.sample_virtual_sequence(&mut rng)
                .chunks(dim)
                .map(<[S]>::to_vec)
                .collect()
        })
        .collect();
    RecordedDb::from_entries(env.id(), seed, &entries)
}

/// Any transition earned reward one.
pub fn success<S: Scalar>(trajectory: &Trajectory<S>) -> bool {
    trajectory.success()
}

/// The virtual object moved more than `threshold` over the episode.
pub fn nontrivial<S: Scalar>(trajectory: &Trajectory<S>, threshold: S) -> bool {
    trajectory.virtual_displacement() > threshold
}

#[cfg(test)]
mod tests;
