use rand::Rng;

use super::sac::Sac;
use crate::rng::LabRng;
use crate::scalar::Scalar;

/// Anything that maps an observation to an action.
pub trait Policy<S> {
    fn act(&self, obs: &[S], rng: &mut LabRng) -> Vec<S>;
}

/// Samples from the squashed Gaussian.
pub struct Stochastic<'a, S>(pub &'a Sac<S>);

/// `tanh(mean)`.
pub struct Deterministic<'a, S>(pub &'a Sac<S>);

impl<S: Scalar> Policy<S> for Stochastic<'_, S> {
    fn act(&self, obs: &[S], rng: &mut LabRng) -> Vec<S> {
        self.0.policy_act(obs, false, rng).0
    }
}

impl<S: Scalar> Policy<S> for Deterministic<'_, S> {
    fn act(&self, obs: &[S], rng: &mut LabRng) -> Vec<S> {
        self.0.policy_act(obs, true, rng).0
    }
}

/// Uniform actions in `[-1, 1]^dim`.
pub struct UniformPolicy {
    pub dim: usize,
}

impl<S: Scalar> Policy<S> for UniformPolicy {
    fn act(&self, _obs: &[S], rng: &mut LabRng) -> Vec<S> {
        (0..self.dim).map(|_| S::lit(rng.random_range(-1.0..=1.0))).collect()
    }
}

pub struct ZeroPolicy {
    pub dim: usize,
}

impl<S: Scalar> Policy<S> for ZeroPolicy {
    fn act(&self, _obs: &[S], _rng: &mut LabRng) -> Vec<S> {
        vec![S::zero(); self.dim]
    }
}

/// Wraps a closure.
pub struct FnPolicy<F>(pub F);

impl<S, F: Fn(&[S], &mut LabRng) -> Vec<S>> Policy<S> for FnPolicy<F> {
    fn act(&self, obs: &[S], rng: &mut LabRng) -> Vec<S> {
        (self.0)(obs, rng)
    }
}
