use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score used to rank hindsight candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    RewardPerTransition,
    RewardPerEpisode,
    TdPerTransition,
    TdPerEpisode,
    /// Distance the virtual object moved between episode start and end.
    VirtualDisplacement,
}

impl Criterion {
    /// The only granularity each criterion can be applied at.
    pub fn granularity(self) -> Granularity {
        match self {
            Criterion::RewardPerTransition | Criterion::TdPerTransition => Granularity::Transition,
            _ => Granularity::Episode,
        }
    }

    pub fn needs_learner(self) -> bool {
        matches!(self, Criterion::TdPerTransition | Criterion::TdPerEpisode)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::RewardPerTransition => "reward_per_transition",
            Criterion::RewardPerEpisode => "reward_per_episode",
            Criterion::TdPerTransition => "td_per_transition",
            Criterion::TdPerEpisode => "td_per_episode",
            Criterion::VirtualDisplacement => "virtual_displacement",
        }
    }
}

/// Whether hindsight data is selected and inserted per transition or as
/// whole trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Transition,
    Episode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HindsightConfig {
    /// Number of parallel virtual streams M. Zero disables hindsight states.
    pub num_parallel: usize,
    pub criterion: Criterion,
    /// Candidates must score strictly above this.
    pub threshold: f64,
    /// At most this many candidates are inserted per round.
    pub cap: usize,
    #[serde(default = "default_insert_every")]
    pub insert_every: usize,
    /// Derived from the criterion when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
}

fn default_insert_every() -> usize {
    1
}

impl HindsightConfig {
    pub fn new(num_parallel: usize, criterion: Criterion, threshold: f64, cap: usize) -> Self {
        Self {
            num_parallel,
            criterion,
            threshold,
            cap,
            insert_every: 1,
            granularity: None,
        }
    }

    /// Plain HySR: no parallel streams.
    pub fn disabled() -> Self {
        Self::new(0, Criterion::RewardPerEpisode, 0.5, 0)
    }

    pub fn granularity(&self) -> Granularity {
        self.criterion.granularity()
    }

    pub fn enabled(&self) -> bool {
        self.num_parallel > 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.insert_every == 0 {
            return Err(Error::Config("hindsight.insert_every must be at least 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::Config("hindsight.threshold must not be NaN".into()));
        }
        if let Some(g) = self.granularity {
            if g != self.criterion.granularity() {
                return Err(Error::Config(format!(
                    "criterion {} requires {:?} granularity",
                    self.criterion.as_str(),
                    self.criterion.granularity()
                )));
            }
        }
        Ok(())
    }
}
