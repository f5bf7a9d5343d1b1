//! Named run configurations.
//!
//! `Full` presets use the network sizes, update schedules and budgets of
//! full-size robot experiments. `Desk` presets shrink them so a run finishes
//! in a few minutes on one core.

use std::path::PathBuf;

use super::config::{DbConfig, RunConfig};
use crate::domain::{Criterion, EnvId, HindsightConfig};
use crate::envs::{EnvConfig, DEFAULT_MOVE_THRESHOLD};
use crate::error::{Error, Result};
use crate::hindsight::HerConfig;
use crate::learner::{Activation, EntCoef, LearnerConfig, TrainFreqUnit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

/// Variants understood by [`preset`].
pub const VARIANTS: [&str; 5] = ["vanilla", "his", "his_td", "her", "her_his"];

fn base(name: &str, env: EnvId, learner: LearnerConfig, hindsight: HindsightConfig) -> RunConfig {
    RunConfig {
        name: name.to_string(),
        env: EnvConfig::new(env),
        learner,
        hindsight,
        her: None,
        total_episodes: 10_000,
        eval_every: 100,
        eval_episodes: 50,
        seed: 0,
        output_dir: PathBuf::from(format!("{}_{name}", env.as_str())),
        db: DbConfig::default(),
        checkpoint_every: 1000,
        nontrivial_threshold: DEFAULT_MOVE_THRESHOLD,
        record_timing: true,
    }
}

pub fn volley_learner(scale: Scale) -> LearnerConfig {
    match scale {
        Scale::Full => LearnerConfig {
            gamma: 0.9999,
            learning_rate: 3e-4,
            batch_size: 256,
            num_layers: 1,
            num_hidden: 200,
            gradient_steps: 500,
            train_freq: 1,
            train_freq_unit: TrainFreqUnit::Episode,
            buffer_size: 5_000_000,
            learning_starts: 10_000,
            ent_coef: EntCoef::Fixed(0.0),
            tau: 0.005,
            activation: Activation::Relu,
        },
        Scale::Desk => LearnerConfig {
            gamma: 0.99,
            learning_rate: 3e-4,
            batch_size: 128,
            num_layers: 2,
            num_hidden: 64,
            gradient_steps: 32,
            train_freq: 1,
            train_freq_unit: TrainFreqUnit::Episode,
            buffer_size: 200_000,
            learning_starts: 1_000,
            ent_coef: EntCoef::auto(),
            tau: 0.01,
            activation: Activation::Relu,
        },
    }
}

pub fn manip_learner(scale: Scale) -> LearnerConfig {
    match scale {
        Scale::Full => LearnerConfig {
            gamma: 0.95,
            learning_rate: 1e-3,
            batch_size: 256,
            num_layers: 2,
            num_hidden: 64,
            gradient_steps: 1,
            train_freq: 1,
            train_freq_unit: TrainFreqUnit::Step,
            buffer_size: 1_000_000,
            learning_starts: 1_000,
            ent_coef: EntCoef::auto(),
            tau: 0.005,
            activation: Activation::Relu,
        },
        Scale::Desk => LearnerConfig {
            gamma: 0.95,
            learning_rate: 1e-3,
            batch_size: 128,
            num_layers: 2,
            num_hidden: 64,
            gradient_steps: 1,
            train_freq: 2,
            train_freq_unit: TrainFreqUnit::Step,
            buffer_size: 500_000,
            learning_starts: 1_000,
            ent_coef: EntCoef::auto(),
            tau: 0.01,
            activation: Activation::Relu,
        },
    }
}

/// Builds the preset `variant` for `env`.
pub fn preset(env: EnvId, variant: &str, scale: Scale) -> Result<RunConfig> {
    let unknown = || Error::Config(format!("no preset {variant} for {env}"));
    let mut cfg = match env {
        EnvId::Volley2d => {
            let streams = 20;
            let hindsight = match variant {
                "vanilla" => HindsightConfig::disabled(),
                "his" => HindsightConfig::new(streams, Criterion::RewardPerEpisode, 0.5, 3),
                "his_td" => HindsightConfig::new(streams, Criterion::TdPerTransition, 0.5, 3),
                _ => return Err(unknown()),
            };
            base(variant, env, volley_learner(scale), hindsight)
        }
        EnvId::Pushbox2d | EnvId::Slidedisk2d => {
            let streams = 100;
            let his = HindsightConfig::new(streams, Criterion::VirtualDisplacement, 0.02, 3);
            let (hindsight, her) = match variant {
                "vanilla" => (HindsightConfig::disabled(), None),
                "his" => (his, None),
                "her" => (HindsightConfig::disabled(), Some(HerConfig::future(4))),
                "her_his" => (his, Some(HerConfig::future(4))),
                _ => return Err(unknown()),
            };
            let mut c = base(variant, env, manip_learner(scale), hindsight);
            c.her = her;
            c
        }
    };
    if scale == Scale::Desk {
        cfg.total_episodes = 2_000;
        cfg.eval_every = 50;
        cfg.eval_episodes = if env == EnvId::Volley2d { 100 } else { 50 };
    }
    cfg.validate()?;
    Ok(cfg)
}
