//! Off-policy actor-critic learner.

mod adam;
mod checkpoint;
mod config;
mod nn;
mod policy;
mod sac;


pub use adam::{Adam, ScalarAdam};
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EntCoef, LearnerConfig, TrainFreqUnit};
pub use nn::{Activation, Dense, DenseNet, ForwardCache, Grads};
pub use policy::{Deterministic, FnPolicy, Policy, Stochastic, UniformPolicy, ZeroPolicy};
pub use sac::{squashed_log_prob, ActorPass, Batch, LossReport, Sac, LOG_STD_MAX, LOG_STD_MIN};
