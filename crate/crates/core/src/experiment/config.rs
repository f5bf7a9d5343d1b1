use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{EnvId, HindsightConfig};
use crate::envs::{make_env, EnvConfig, DEFAULT_MOVE_THRESHOLD};
use crate::error::{Error, Result};
use crate::hindsight::HerConfig;
use crate::learner::LearnerConfig;

/// Where the recorded database of an interception run comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbConfig {
    /// Load this file instead of generating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_db_size")]
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_db_size() -> usize {
    100
}

impl Default for DbConfig {
    fn default() -> Self {
        Self {
            path: None,
            size: default_db_size(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Variant label used to group runs in reports.
    pub name: String,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub hindsight: HindsightConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub her: Option<HerConfig>,
    pub total_episodes: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub db: DbConfig,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Displacement below which a successful trajectory counts as trivial.
    #[serde(default = "default_move_threshold")]
    pub nontrivial_threshold: f64,
    /// Record CPU time in the metrics. Off, `wall_clock_s` is always 0 and
    /// metrics files are reproducible byte for byte.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

fn default_eval_every() -> usize {
    100
}
fn default_eval_episodes() -> usize {
    50
}
fn default_checkpoint_every() -> usize {
    1000
}
fn default_move_threshold() -> f64 {
    DEFAULT_MOVE_THRESHOLD
}
fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialise")
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 || self.total_episodes < self.eval_every {
            return Err(Error::Config(format!(
                "need total_episodes >= eval_every >= 1, got {} and {}",
                self.total_episodes, self.eval_every
            )));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        self.learner.validate()?;
        self.hindsight.validate()?;
        let env = make_env::<f64>(&self.env)?;
        if let Some(her) = &self.her {
            if !env.spec().goal_conditioned() {
                return Err(Error::Config(format!(
                    "her needs a goal-conditioned environment, {} is not",
                    self.env.id
                )));
            }
            if her.n_sampled_goal == 0 {
                return Err(Error::Config("her.n_sampled_goal must be at least 1".into()));
            }
        }
        if env.uses_recorded_replay() && self.db.path.is_none() && self.db.size == 0 {
            return Err(Error::Config("db.size must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&serde_json::to_value(self).expect("configs serialise")).expect("json");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn env_id(&self) -> EnvId {
        self.env.id
    }
}
