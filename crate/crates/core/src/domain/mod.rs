//! Shared vocabulary: hybrid states, transitions, trajectories, the recorded
//! virtual-state database, the replay buffer and the hindsight configuration.

mod buffer;
mod config;
mod recorded;
mod state;
mod transition;

pub use buffer::ReplayBuffer;
pub use config::{Criterion, Granularity, HindsightConfig};
pub use recorded::{EntryView, RecordedDb, DB_MAGIC};
pub use state::{compose_observation, EnvId, HybridState, Layout, Mode, VirtualInstance};
pub use transition::{Provenance, Terminal, Trajectory, Transition};
