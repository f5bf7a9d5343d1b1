//! Soft actor-critic with twin critics and polyak-averaged targets.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::adam::{Adam, ScalarAdam};
use super::config::{EntCoef, LearnerConfig};
use super::nn::{Activation, DenseNet, ForwardCache, Grads};
use crate::domain::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, LabRng, Purpose};
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Scale of the final actor layer at initialisation.
pub const ACTOR_OUTPUT_SCALE: f64 = 1e-2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Training batch in matrix form. `not_done` is zero only for absorbing
/// terminals; time-limit truncations bootstrap.
#[derive(Clone, Debug)]
pub struct Batch<S> {
    pub obs: Array2<S>,
    pub actions: Array2<S>,
    pub rewards: Array1<S>,
    pub next_obs: Array2<S>,
    pub not_done: Array1<S>,
}

impl<S: Scalar> Batch<S> {
    pub fn from_transitions(transitions: &[&Transition<S>], obs_dim: usize, act_dim: usize) -> Self {
        let n = transitions.len();
        let mut obs = Array2::zeros((n, obs_dim));
        let mut next_obs = Array2::zeros((n, obs_dim));
        let mut actions = Array2::zeros((n, act_dim));
        let mut rewards = Array1::zeros(n);
        let mut not_done = Array1::zeros(n);
        for (i, tr) in transitions.iter().enumerate() {
            tr.state
                .write_observation(obs.row_mut(i).as_slice_mut().expect("standard layout"));
            tr.next_state
                .write_observation(next_obs.row_mut(i).as_slice_mut().expect("standard layout"));
            actions.row_mut(i).iter_mut().zip(&tr.action).for_each(|(d, &a)| *d = a);
            rewards[i] = tr.reward;
            not_done[i] = if tr.terminal.is_absorbing() {
                S::zero()
            } else {
                S::one()
            };
        }
        Batch {
            obs,
            actions,
            rewards,
            next_obs,
            not_done,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Averages over the gradient steps of one `update` call; all `None` when
/// no step ran.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub steps: usize,
    pub q_loss: Option<f64>,
    pub policy_loss: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub mean_q: Option<f64>,
}

impl LossReport {
    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }
}

/// Reparameterised actor pass for a fixed standard-normal `noise`.
#[derive(Clone, Debug)]
pub struct ActorPass<S> {
    cache: ForwardCache<S>,
    log_std_clamped: Array2<bool>,
    std: Array2<S>,
    noise: Array2<S>,
    pub actions: Array2<S>,
    pub log_prob: Array1<S>,
}

/// `tanh` kept strictly inside (-1, 1); it rounds to +-1 in floating point
/// once `|u|` is large.
fn squash<S: Scalar>(u: S) -> S {
    let edge = S::one() - S::epsilon();
    u.tanh().max(-edge).min(edge)
}

fn softplus<S: Scalar>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(u)^2)` without cancellation.
fn log_squash_jacobian<S: Scalar>(u: S) -> S {
    S::lit(2.0) * (S::LN_2() - u - softplus(S::lit(-2.0) * u))
}

/// Log-density of the squashed Gaussian at pre-squash point `u`.
pub fn squashed_log_prob<S: Scalar>(mean: &[S], log_std: &[S], u: &[S]) -> S {
    mean.iter()
        .zip(log_std)
        .zip(u)
        .map(|((&m, &ls), &u)| {
            let z = (u - m) / ls.exp();
            S::lit(-0.5) * z * z - ls - S::lit(HALF_LN_2PI) - log_squash_jacobian(u)
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Sac<S> {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub config: LearnerConfig,
    pub actor: DenseNet<S>,
    pub critics: [DenseNet<S>; 2],
    pub targets: [DenseNet<S>; 2],
    pub actor_opt: Adam<S>,
    pub critic_opts: [Adam<S>; 2],
    pub log_alpha: f64,
    pub alpha_opt: ScalarAdam,
    pub rng: LabRng,
    pub updates: u64,
    /// Per-component observation multipliers, applied before every network
    /// pass on raw observations. Empty means identity.
    pub input_scale: Vec<S>,
}

impl<S: Scalar> Sac<S> {
    /// Initialises networks from `(seed, LearnerInit)` and the update
    /// generator from `(seed, LearnerUpdate)`.
    pub fn new(obs_dim: usize, act_dim: usize, config: LearnerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = stream_rng(seed, Purpose::LearnerInit, 0, 0);
        let hidden = config.hidden();
        let sizes = |inp: usize, out: usize| {
            let mut v = vec![inp];
            v.extend(&hidden);
            v.push(out);
            v
        };
        let act = config.activation;
        let actor = DenseNet::new(&sizes(obs_dim, 2 * act_dim), act, ACTOR_OUTPUT_SCALE, &mut init);
        let q_sizes = sizes(obs_dim + act_dim, 1);
        let critics = [
            DenseNet::new(&q_sizes, act, 1.0, &mut init),
            DenseNet::new(&q_sizes, act, 1.0, &mut init),
        ];
        let targets = critics.clone();
        let log_alpha = match config.ent_coef {
            EntCoef::Fixed(a) => a.ln(),
            EntCoef::Auto { init, .. } => init.ln(),
        };
        Ok(Self {
            obs_dim,
            act_dim,
            actor_opt: Adam::new(&actor),
            critic_opts: [Adam::new(&critics[0]), Adam::new(&critics[1])],
            actor,
            critics,
            targets,
            log_alpha,
            alpha_opt: ScalarAdam::default(),
            rng: stream_rng(seed, Purpose::LearnerUpdate, 0, 0),
            updates: 0,
            input_scale: Vec::new(),
            config,
        })
    }

    pub fn set_input_scale(&mut self, scale: &[S]) -> Result<()> {
        if !scale.is_empty() && scale.len() != self.obs_dim {
            return Err(Error::Structural(format!(
                "input scale has {} entries for observation dim {}",
                scale.len(),
                self.obs_dim
            )));
        }
        self.input_scale = scale.to_vec();
        Ok(())
    }

    fn scale_rows(&self, m: &mut Array2<S>) {
        if self.input_scale.is_empty() {
            return;
        }
        for mut row in m.rows_mut() {
            row.iter_mut().zip(&self.input_scale).for_each(|(x, &k)| *x = *x * k);
        }
    }

    /// Batch from raw transitions with the input scale applied.
    pub fn batch(&self, transitions: &[&Transition<S>]) -> Batch<S> {
        let mut b = Batch::from_transitions(transitions, self.obs_dim, self.act_dim);
        self.scale_rows(&mut b.obs);
        self.scale_rows(&mut b.next_obs);
        b
    }

    pub fn activation(&self) -> Activation {
        self.config.activation
    }

    /// Current entropy coefficient.
    pub fn alpha(&self) -> f64 {
        match self.config.ent_coef {
            EntCoef::Fixed(a) => a,
            EntCoef::Auto { .. } => self.log_alpha.exp(),
        }
    }

    pub fn target_entropy(&self) -> f64 {
        match self.config.ent_coef {
            EntCoef::Auto {
                target_entropy: Some(h),
                ..
            } => h,
            _ => -(self.act_dim as f64),
        }
    }

    /// Splits the actor head into mean and clamped log-std.
    fn heads(&self, out: &Array2<S>) -> (Array2<S>, Array2<S>, Array2<bool>) {
        let d = self.act_dim;
        let mean = out.slice(s![.., ..d]).to_owned();
        let raw = out.slice(s![.., d..]);
        let (lo, hi) = (S::lit(LOG_STD_MIN), S::lit(LOG_STD_MAX));
        let clamped = raw.mapv(|v| v < lo || v > hi);
        let log_std = raw.mapv(|v| v.max(lo).min(hi));
        (mean, log_std, clamped)
    }

    /// Means of the policy at each row of `obs`.
    pub fn mean_actions(&self, obs: ArrayView2<'_, S>) -> Array2<S> {
        let out = self.actor.forward(obs);
        out.slice(s![.., ..self.act_dim]).mapv(squash)
    }

    pub fn actor_pass(&self, obs: ArrayView2<'_, S>, noise: Array2<S>) -> ActorPass<S> {
        let (out, cache) = self.actor.forward_cached(obs);
        let (mean, log_std, log_std_clamped) = self.heads(&out);
        let std = log_std.mapv(|v| v.exp());
        let u = &mean + &(&std * &noise);
        let actions = u.mapv(squash);
        let n = obs.nrows();
        let mut log_prob = Array1::zeros(n);
        for i in 0..n {
            log_prob[i] = (0..self.act_dim)
                .map(|j| {
                    let e = noise[[i, j]];
                    S::lit(-0.5) * e * e - log_std[[i, j]] - S::lit(HALF_LN_2PI) - log_squash_jacobian(u[[i, j]])
                })
                .sum();
        }
        ActorPass {
            cache,
            log_std_clamped,
            std,
            noise,
            actions,
            log_prob,
        }
    }

    /// Action for one observation, with its log-probability. The
    /// deterministic action is `tanh(mean)`.
    pub fn policy_act(&self, obs: &[S], deterministic: bool, rng: &mut LabRng) -> (Vec<S>, S) {
        let mut x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
        self.scale_rows(&mut x);
        let noise = if deterministic {
            Array2::zeros((1, self.act_dim))
        } else {
            Array2::from_shape_simple_fn((1, self.act_dim), || S::lit(rng.sample::<f64, _>(StandardNormal)))
        };
        let pass = self.actor_pass(x.view(), noise);
        (pass.actions.row(0).to_vec(), pass.log_prob[0])
    }

    fn q_input(obs: ArrayView2<'_, S>, actions: ArrayView2<'_, S>) -> Array2<S> {
        concatenate(Axis(1), &[obs, actions]).expect("matching rows")
    }

    fn min_q(nets: &[DenseNet<S>; 2], input: ArrayView2<'_, S>) -> Array1<S> {
        let q1 = nets[0].forward(input);
        let q2 = nets[1].forward(input);
        q1.column(0).iter().zip(q2.column(0)).map(|(&a, &b)| a.min(b)).collect()
    }

    /// Soft bootstrap target `r + gamma * not_done * (min Q_targ(s', a') - alpha * log pi(a'|s'))`.
    pub fn soft_target(&self, batch: &Batch<S>, next_noise: Array2<S>, alpha: S) -> Array1<S> {
        let next = self.actor_pass(batch.next_obs.view(), next_noise);
        let q_next = Self::min_q(
            &self.targets,
            Self::q_input(batch.next_obs.view(), next.actions.view()).view(),
        );
        let gamma = S::lit(self.config.gamma);
        let soft = &q_next - &(&next.log_prob * alpha);
        &batch.rewards + &(&batch.not_done * &soft * gamma)
    }

    /// `sum_k 0.5 * mean_i (Q_k(s_i, a_i) - y_i)^2` and its gradients for
    /// both critics; also returns the mean of the online estimates.
    pub fn q_loss(&self, batch: &Batch<S>, target: &Array1<S>) -> (S, [Grads<S>; 2], S) {
        let input = Self::q_input(batch.obs.view(), batch.actions.view());
        let n = S::from_usize_lossy(batch.len());
        let mut loss = S::zero();
        let mut mean_q = S::zero();
        let grads = [0, 1].map(|k| {
            let (q, cache) = self.critics[k].forward_cached(input.view());
            let diff = &q.column(0) - target;
            loss += S::lit(0.5) * diff.mapv(|d| d * d).sum() / n;
            mean_q += q.sum() / n / S::lit(2.0);
            let g = (diff / n).insert_axis(Axis(1));
            self.critics[k].backward(&cache, g).0
        });
        (loss, grads, mean_q)
    }

    /// `mean_i (alpha * log pi(a_i|s_i) - min_k Q_k(s_i, a_i))` with
    /// reparameterised actions, and its gradient for the actor.
    pub fn policy_loss(&self, obs: ArrayView2<'_, S>, pass: &ActorPass<S>, alpha: S) -> (S, Grads<S>) {
        let b = obs.nrows();
        let n = S::from_usize_lossy(b);
        let d = self.act_dim;
        let input = Self::q_input(obs, pass.actions.view());
        let (q1, c1) = self.critics[0].forward_cached(input.view());
        let (q2, c2) = self.critics[1].forward_cached(input.view());
        let mut g1 = Array2::zeros((b, 1));
        let mut g2 = Array2::zeros((b, 1));
        let mut loss = S::zero();
        for i in 0..b {
            let (a, c) = (q1[[i, 0]], q2[[i, 0]]);
            if a <= c {
                g1[[i, 0]] = -S::one() / n;
            } else {
                g2[[i, 0]] = -S::one() / n;
            }
            loss += (alpha * pass.log_prob[i] - a.min(c)) / n;
        }
        let (_, dx1) = self.critics[0].backward(&c1, g1);
        let (_, dx2) = self.critics[1].backward(&c2, g2);
        let da = &dx1.slice(s![.., self.obs_dim..]) + &dx2.slice(s![.., self.obs_dim..]);

        let mut grad_out = Array2::zeros((b, 2 * d));
        let w = alpha / n;
        for i in 0..b {
            for j in 0..d {
                let a = pass.actions[[i, j]];
                // d log pi / du = 2 tanh(u) through the squash correction.
                let g_u = w * S::lit(2.0) * a + da[[i, j]] * (S::one() - a * a);
                grad_out[[i, j]] = g_u;
                grad_out[[i, d + j]] = if pass.log_std_clamped[[i, j]] {
                    S::zero()
                } else {
                    g_u * pass.std[[i, j]] * pass.noise[[i, j]] - w
                };
            }
        }
        let (grads, _) = self.actor.backward(&pass.cache, grad_out);
        (loss, grads)
    }

    /// Temperature loss `-mean(log_alpha * (log pi + target_entropy))` and
    /// its derivative in `log_alpha`.
    pub fn alpha_loss(&self, log_alpha: f64, log_prob: &Array1<S>) -> (f64, f64) {
        let h = self.target_entropy();
        let m = log_prob.iter().map(|l| l.as_f64() + h).sum::<f64>() / log_prob.len() as f64;
        (-log_alpha * m, -m)
    }

    fn draw_noise(&self, rows: usize, rng: &mut LabRng) -> Array2<S> {
        Array2::from_shape_simple_fn((rows, self.act_dim), || S::lit(rng.sample::<f64, _>(StandardNormal)))
    }

    /// One gradient step on `batch` with explicit noise.
    pub fn train_step(&mut self, batch: &Batch<S>, noise: Array2<S>, next_noise: Array2<S>) -> (f64, f64, f64, f64) {
        let lr = S::lit(self.config.learning_rate);
        let pass = self.actor_pass(batch.obs.view(), noise);
        let alpha = self.alpha();
        if matches!(self.config.ent_coef, EntCoef::Auto { .. }) {
            let (_, g) = self.alpha_loss(self.log_alpha, &pass.log_prob);
            let mut la = self.log_alpha;
            self.alpha_opt.step(&mut la, g, self.config.learning_rate);
            self.log_alpha = la;
        }
        let alpha = S::lit(alpha);

        let target = self.soft_target(batch, next_noise, alpha);
        let (q_loss, q_grads, mean_q) = self.q_loss(batch, &target);
        for (k, g) in q_grads.iter().enumerate() {
            self.critic_opts[k].step(&mut self.critics[k], g, lr);
        }

        let (p_loss, p_grads) = self.policy_loss(batch.obs.view(), &pass, alpha);
        self.actor_opt.step(&mut self.actor, &p_grads, lr);

        let tau = S::lit(self.config.tau);
        for k in 0..2 {
            self.targets[k]
                .polyak_from(&self.critics[k], tau)
                .expect("targets share the critic architecture");
        }
        self.updates += 1;
        (q_loss.as_f64(), p_loss.as_f64(), alpha.as_f64(), mean_q.as_f64())
    }

    /// Runs `gradient_steps` steps with the learner's own generator. A no-op
    /// with an empty report while the buffer holds fewer than
    /// `learning_starts` transitions.
    pub fn update(&mut self, buffer: &ReplayBuffer<Transition<S>>) -> Result<LossReport> {
        let mut rng = self.rng.clone();
        let report = self.update_with(buffer, &mut rng);
        self.rng = rng;
        report
    }

    pub fn update_with(&mut self, buffer: &ReplayBuffer<Transition<S>>, rng: &mut LabRng) -> Result<LossReport> {
        if buffer.len() < self.config.learning_starts.max(1) {
            return Ok(LossReport::default());
        }
        self.train(buffer, self.config.gradient_steps, rng)
    }

    /// Runs exactly `steps` gradient steps on uniform batches from `buffer`.
    pub fn train(
        &mut self,
        buffer: &ReplayBuffer<Transition<S>>,
        steps: usize,
        rng: &mut LabRng,
    ) -> Result<LossReport> {
        let mut sums = [0.0f64; 4];
        for _ in 0..steps {
            let sample = buffer.sample(self.config.batch_size, rng)?;
            let batch = self.batch(&sample);
            let noise = self.draw_noise(batch.len(), rng);
            let next_noise = self.draw_noise(batch.len(), rng);
            let (q, p, a, m) = self.train_step(&batch, noise, next_noise);
            for (s, v) in sums.iter_mut().zip([q, p, a, m]) {
                *s += v;
            }
        }
        if steps == 0 {
            return Ok(LossReport::default());
        }
        let k = steps as f64;
        Ok(LossReport {
            steps,
            q_loss: Some(sums[0] / k),
            policy_loss: Some(sums[1] / k),
            entropy_coef: Some(sums[2] / k),
            mean_q: Some(sums[3] / k),
        })
    }

    /// Scoring TD error `r + gamma * not_done * min Q_targ(s', tanh(mu(s'))) - min Q(s, a)`,
    /// without the entropy term.
    pub fn td_errors(&self, batch: &Batch<S>) -> Array1<S> {
        if batch.is_empty() {
            return Array1::zeros(0);
        }
        let next_a = self.mean_actions(batch.next_obs.view());
        let q_next = Self::min_q(
            &self.targets,
            Self::q_input(batch.next_obs.view(), next_a.view()).view(),
        );
        let q = Self::min_q(
            &self.critics,
            Self::q_input(batch.obs.view(), batch.actions.view()).view(),
        );
        let gamma = S::lit(self.config.gamma);
        &batch.rewards + &(&batch.not_done * &q_next * gamma) - &q
    }

    pub fn td_error(&self, transition: &Transition<S>) -> S {
        self.td_errors(&self.batch(&[transition]))[0]
    }

    /// Copies online critic parameters into the targets.
    pub fn sync_targets(&mut self) {
        self.targets = self.critics.clone();
    }

    /// `targets <- (1 - tau) targets + tau online`.
    pub fn polyak(&mut self, tau: S) -> Result<()> {
        for k in 0..2 {
            self.targets[k].polyak_from(&self.critics[k], tau)?;
        }
        Ok(())
    }

    /// Checks that parameter vectors line up with another learner.
    pub fn same_architecture(&self, other: &Sac<S>) -> Result<()> {
        if self.actor.sizes() != other.actor.sizes() || self.critics[0].sizes() != other.critics[0].sizes() {
            return Err(Error::Structural("learners have different architectures".into()));
        }
        Ok(())
    }
}
