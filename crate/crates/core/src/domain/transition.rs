use crate::scalar::Scalar;

use super::state::{HybridState, Mode};

/// How a transition ends, if it does.
///
/// TD targets bootstrap through `TimeLimit` but not through `EnvDone`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    NotDone,
    EnvDone,
    TimeLimit,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        !matches!(self, Terminal::NotDone)
    }

    /// Whether the value of the successor state is cut off.
    pub fn is_absorbing(self) -> bool {
        matches!(self, Terminal::EnvDone)
    }
}

/// Where a stored transition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    OnPolicy,
    HiS,
    HER,
    HiSHER,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub state: HybridState<S>,
    pub action: Vec<S>,
    pub reward: S,
    pub next_state: HybridState<S>,
    pub terminal: Terminal,
    pub provenance: Provenance,
}

/// A time-contiguous episode (or hindsight stream of one).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub transitions: Vec<Transition<S>>,
    pub contact_time: Option<usize>,
    pub episode_seed: u64,
    pub main_source_id: u64,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> S {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Any transition earned reward one.
    pub fn success(&self) -> bool {
        self.transitions.iter().any(|t| t.reward >= S::one())
    }

    /// Virtual-object displacement between the first and the last state.
    pub fn virtual_displacement(&self) -> S {
        match (self.transitions.first(), self.transitions.last()) {
            (Some(first), Some(last)) => {
                let a = first.state.virt.position();
                let b = last.next_state.virt.position();
                ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])).sqrt()
            }
            _ => S::zero(),
        }
    }

    /// Checks time contiguity and the replay-until-contact switch: states at
    /// or before the contact step are replayed, later ones simulated.
    pub fn is_well_formed(&self) -> bool {
        if self.transitions.windows(2).any(|p| p[0].next_state != p[1].state) {
            return false;
        }
        let expected = |time: usize| match self.contact_time {
            Some(tc) if time > tc => Mode::Simulated,
            _ => Mode::Replay,
        };
        self.transitions.iter().all(|t| {
            t.next_state.time == t.state.time + 1
                && t.state.virt.mode == expected(t.state.time)
                && t.next_state.virt.mode == expected(t.next_state.time)
                && t.state.virt.is_consistent(t.state.time)
                && t.next_state.virt.is_consistent(t.next_state.time)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VirtualInstance;

    fn hs(time: usize, x: f64, mode: Mode, tc: Option<usize>) -> HybridState<f64> {
        HybridState {
            real: vec![0.0],
            virt: VirtualInstance {
                state: vec![x, 0.0],
                mode,
                contact_time: tc,
                source_id: 0,
            },
            goal: None,
            time,
        }
    }

    fn tr(a: HybridState<f64>, b: HybridState<f64>, r: f64) -> Transition<f64> {
        Transition {
            state: a,
            action: vec![0.0],
            reward: r,
            next_state: b,
            terminal: Terminal::NotDone,
            provenance: Provenance::OnPolicy,
        }
    }

    #[test]
    fn success_and_displacement() {
        let s0 = hs(0, 0.0, Mode::Replay, None);
        let s1 = hs(1, 0.0, Mode::Simulated, Some(0));
        let s2 = hs(2, 0.07, Mode::Simulated, Some(0));
        let traj = Trajectory {
            transitions: vec![tr(s0, s1.clone(), 0.0), tr(s1, s2, 1.0)],
            contact_time: Some(0),
            episode_seed: 0,
            main_source_id: 0,
        };
        assert!(traj.success());
        assert!((traj.virtual_displacement() - 0.07).abs() < 1e-15);
        assert!(traj.is_well_formed());
    }

    #[test]
    fn broken_contiguity_detected() {
        let traj = Trajectory {
            transitions: vec![
                tr(hs(0, 0.0, Mode::Replay, None), hs(1, 0.0, Mode::Replay, None), 0.0),
                tr(hs(1, 0.5, Mode::Replay, None), hs(2, 0.5, Mode::Replay, None), 0.0),
            ],
            contact_time: None,
            episode_seed: 0,
            main_source_id: 0,
        };
        assert!(!traj.is_well_formed());
    }
}
