//! Hindsight-state relabeling for hybrid sim-and-real reinforcement learning.
//!
//! A rollout keeps the robot ("real" part) single and multiplies the
//! simulated object ("virtual" part): `M` extra virtual streams are advanced
//! under the same real states and actions, relabeled in hindsight, scored,
//! and the best of them are added to the replay buffer of an off-policy
//! actor-critic learner, optionally followed by goal relabeling.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what experiments and
//! persisted files use.

pub mod domain;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod hindsight;
pub mod io;
pub mod learner;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use domain::{Criterion, EnvId, Granularity, HindsightConfig, Layout, Mode, Provenance, Terminal};
pub use envs::{make_env, EnvConfig};

pub type HybridState = domain::HybridState<f64>;
pub type VirtualInstance = domain::VirtualInstance<f64>;
pub type Transition = domain::Transition<f64>;
pub type Trajectory = domain::Trajectory<f64>;
pub type RecordedDb = domain::RecordedDb<f64>;
pub type ReplayBuffer = domain::ReplayBuffer<Transition>;
pub type Env = envs::Env<f64>;
pub type EnvSpec = envs::EnvSpec<f64>;
pub type StreamBundle = hindsight::StreamBundle<f64>;
pub type DenseNet = learner::DenseNet<f64>;
pub type Sac = learner::Sac<f64>;
