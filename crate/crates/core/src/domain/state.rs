use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifier of one of the bundled environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Volley2d,
    Pushbox2d,
    Slidedisk2d,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::Volley2d, EnvId::Pushbox2d, EnvId::Slidedisk2d];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Volley2d => "volley2d",
            EnvId::Pushbox2d => "pushbox2d",
            EnvId::Slidedisk2d => "slidedisk2d",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown environment id `{s}`")))
    }
}

/// Whether the virtual object is currently replayed from a recording or
/// driven by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Replay,
    Simulated,
}

/// One instance of the virtual object.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualInstance<S> {
    pub state: Vec<S>,
    pub mode: Mode,
    /// Step at which the first real/virtual contact happened.
    pub contact_time: Option<usize>,
    /// Recorded entry (or sampled initial state) this instance started from.
    pub source_id: u64,
}

impl<S: Scalar> VirtualInstance<S> {
    pub fn replay(state: Vec<S>, source_id: u64) -> Self {
        Self {
            state,
            mode: Mode::Replay,
            contact_time: None,
            source_id,
        }
    }

    /// Planar position of the object; the first two state components in
    /// every environment.
    pub fn position(&self) -> [S; 2] {
        [self.state[0], self.state[1]]
    }

    /// Checks the mode/contact-time coupling at step `time`.
    pub fn is_consistent(&self, time: usize) -> bool {
        match (self.mode, self.contact_time) {
            (Mode::Replay, None) => true,
            (Mode::Simulated, Some(tc)) => tc <= time,
            _ => false,
        }
    }
}

/// Factored state `[real, virtual]` plus an optional goal.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState<S> {
    pub real: Vec<S>,
    pub virt: VirtualInstance<S>,
    pub goal: Option<Vec<S>>,
    pub time: usize,
}

/// Dimensions of the observation parts of an environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub real: usize,
    pub virt: usize,
    /// `None` for environments without goal conditioning.
    pub goal: Option<usize>,
}

impl Layout {
    pub fn observation_dim(&self) -> usize {
        self.real + self.virt + self.goal.unwrap_or(0)
    }
}

impl<S: Scalar> HybridState<S> {
    pub fn check(&self, layout: &Layout) -> Result<()> {
        if self.real.len() != layout.real {
            return Err(Error::Structural(format!(
                "real part has {} components, environment expects {}",
                self.real.len(),
                layout.real
            )));
        }
        if self.virt.state.len() != layout.virt {
            return Err(Error::Structural(format!(
                "virtual part has {} components, environment expects {}",
                self.virt.state.len(),
                layout.virt
            )));
        }
        match (&self.goal, layout.goal) {
            (None, None) => Ok(()),
            (Some(g), Some(d)) if g.len() == d => Ok(()),
            (Some(g), Some(d)) => Err(Error::Structural(format!(
                "goal has {} components, environment expects {d}",
                g.len()
            ))),
            (Some(_), None) => Err(Error::Structural(
                "goal present on an environment without goal conditioning".into(),
            )),
            (None, Some(_)) => Err(Error::Structural("goal missing".into())),
        }
    }

    /// Writes `[real | virt | goal]` into `out`, which must have exactly
    /// `layout.observation_dim()` slots. The caller guarantees the shape.
    pub fn write_observation(&self, out: &mut [S]) {
        let (r, rest) = out.split_at_mut(self.real.len());
        r.copy_from_slice(&self.real);
        let (v, g) = rest.split_at_mut(self.virt.state.len());
        v.copy_from_slice(&self.virt.state);
        if let Some(goal) = &self.goal {
            g.copy_from_slice(goal);
        }
    }
}

/// Flat observation `[real | virt | goal?]`.
///
/// Replay/simulate mode and contact time are deliberately absent: the policy
/// must not be able to tell a replayed object from a simulated one.
pub fn compose_observation<S: Scalar>(state: &HybridState<S>, layout: &Layout) -> Result<Vec<S>> {
    state.check(layout)?;
    let mut out = vec![S::zero(); layout.observation_dim()];
    state.write_observation(&mut out);
    Ok(out)
}
