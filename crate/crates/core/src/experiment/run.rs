use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::clock::process_cpu_seconds;
use super::config::RunConfig;
use super::metrics::{write_metrics, MetricsRow};
use crate::domain::{RecordedDb, ReplayBuffer, Trajectory, Transition};
use crate::envs::{generate_recorded_db, make_env, Env};
use crate::error::{Error, Result};
use crate::hindsight::{
    continue_tail, her_relabel, her_trajectories, his_insert, rollout_hysr, PendingHindsight, TdEvaluator,
};
use crate::io::write_atomic;
use crate::learner::{Deterministic, LossReport, Policy, Sac, Stochastic, TrainFreqUnit, UniformPolicy};
use crate::rng::EpisodeRngs;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub db: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub env_id: String,
    pub config_hash: String,
    pub version: String,
    pub seeds: Seeds,
    pub started_at: String,
    pub finished_at: String,
    pub episodes: usize,
    pub env_steps: usize,
    pub wall_clock_s: f64,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn version_string() -> String {
    match option_env!("HIS_LAB_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Loads or generates the recorded database an environment replays from.
pub fn load_db(config: &RunConfig, env: &Env<f64>) -> Result<Option<RecordedDb<f64>>> {
    if !env.uses_recorded_replay() {
        return Ok(None);
    }
    let db = match &config.db.path {
        Some(p) => RecordedDb::read(p)?,
        None => generate_recorded_db(env, config.db.size, config.db.seed)?,
    };
    if db.env_id != env.id() {
        return Err(Error::Config(format!(
            "database was recorded for {}, run uses {}",
            db.env_id,
            env.id()
        )));
    }
    Ok(Some(db))
}

/// Fraction of `n` episodes on which `policy` succeeds. Episodes draw from
/// the evaluation streams of `seed`, never from training streams, and
/// nothing is stored anywhere.
pub fn evaluate<P: Policy<f64> + ?Sized>(
    policy: &P,
    env: &Env<f64>,
    db: Option<&RecordedDb<f64>>,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Precondition("evaluation needs at least one episode".into()));
    }
    let mut wins = 0usize;
    for i in 0..n {
        let mut rngs = EpisodeRngs::evaluation(seed, i as u64);
        let bundle = rollout_hysr(policy, env, db, 0, &mut rngs, i as u64)?;
        wins += bundle.main.success() as usize;
    }
    Ok(wins as f64 / n as f64)
}

/// Live state of a training run.
pub struct Trainer {
    pub config: RunConfig,
    pub env: Env<f64>,
    pub db: Option<RecordedDb<f64>>,
    pub learner: Sac<f64>,
    pub buffer: ReplayBuffer<Transition<f64>>,
    pub pending: PendingHindsight<f64>,
    pub episode: usize,
    pub env_steps: usize,
    pub successful_nontrivial: usize,
    pub his_inserted: usize,
    pub her_inserted: usize,
    pub last_report: LossReport,
    pending_train_steps: usize,
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let env: Env<f64> = make_env(&config.env)?;
        let db = load_db(&config, &env)?;
        let spec = env.spec();
        let mut learner = Sac::new(
            spec.observation_dim(),
            spec.action_dim,
            config.learner.clone(),
            config.seed,
        )?;
        learner.set_input_scale(&spec.obs_scale)?;
        Ok(Self {
            buffer: ReplayBuffer::new(config.learner.buffer_size),
            env,
            db,
            learner,
            pending: PendingHindsight::new(),
            episode: 0,
            env_steps: 0,
            successful_nontrivial: 0,
            his_inserted: 0,
            her_inserted: 0,
            last_report: LossReport::default(),
            pending_train_steps: 0,
            config,
        })
    }

    fn counts(&self, t: &Trajectory<f64>) -> bool {
        t.success() && t.virtual_displacement() > self.config.nontrivial_threshold
    }

    fn learning(&self) -> bool {
        self.env_steps >= self.config.learner.learning_starts
    }

    /// Collect, standard insert, hindsight-state insert, goal relabeling,
    /// update.
    pub fn run_episode(&mut self) -> Result<()> {
        let ep = self.episode as u64;
        let mut rngs = EpisodeRngs::new(self.config.seed, ep);
        let num_streams = self.config.hindsight.num_parallel;
        let warmup = UniformPolicy {
            dim: self.env.spec().action_dim,
        };
        let actor = Stochastic(&self.learner);
        let policy: &dyn Policy<f64> = if self.learning() { &actor } else { &warmup };
        let mut bundle = rollout_hysr(policy, &self.env, self.db.as_ref(), num_streams, &mut rngs, ep)?;
        if num_streams > 0 && self.env.has_variable_length() {
            bundle = continue_tail(policy, &self.env, bundle, &mut rngs.policy);
        }
        let steps = bundle.actions.len();

        let scorer: Option<&dyn TdEvaluator<f64>> = Some(&self.learner);
        let outcome = his_insert(
            &mut self.buffer,
            &bundle,
            &self.env,
            &self.config.hindsight,
            scorer,
            ep,
            &mut self.pending,
        )?;
        self.his_inserted += outcome.inserted;
        let mut counted = self.counts(&bundle.main) as usize;
        counted += outcome.trajectories.iter().filter(|t| self.counts(t)).count();

        if let Some(her) = self.config.her {
            let sources = std::iter::once(&bundle.main).chain(&outcome.trajectories);
            for traj in sources {
                let relabeled = her_relabel(traj, her.n_sampled_goal, her.strategy, &self.env, &mut rngs.her)?;
                counted += her_trajectories(traj, &relabeled, her.n_sampled_goal)
                    .iter()
                    .filter(|t| self.counts(t))
                    .count();
                self.her_inserted += relabeled.len();
                self.buffer.extend(relabeled);
            }
        }
        self.successful_nontrivial += counted;
        self.env_steps += steps;
        self.episode += 1;
        self.train(steps)
    }

    fn train(&mut self, steps: usize) -> Result<()> {
        let cfg = &self.config.learner;
        let n = match cfg.train_freq_unit {
            TrainFreqUnit::Step => {
                self.pending_train_steps += steps;
                let n = self.pending_train_steps / cfg.train_freq;
                self.pending_train_steps %= cfg.train_freq;
                n
            }
            TrainFreqUnit::Episode => (self.episode % cfg.train_freq == 0) as usize,
        };
        if n == 0 || !self.learning() || self.buffer.is_empty() {
            return Ok(());
        }
        let mut rng = self.learner.rng.clone();
        let report = self.learner.train(&self.buffer, n * cfg.gradient_steps, &mut rng)?;
        self.learner.rng = rng;
        if !report.is_empty() {
            self.last_report = report;
        }
        Ok(())
    }

    pub fn evaluate(&self) -> Result<f64> {
        evaluate(
            &Deterministic(&self.learner),
            &self.env,
            self.db.as_ref(),
            self.config.eval_episodes,
            self.config.seed,
        )
    }

    pub fn metrics_row(&self, success_rate: f64, wall_clock_s: f64) -> MetricsRow {
        let r = self.last_report;
        MetricsRow {
            episode: self.episode,
            env_steps: self.env_steps,
            success_rate,
            successful_nontrivial_count: self.successful_nontrivial,
            his_inserted_count: self.his_inserted,
            her_inserted_count: self.her_inserted,
            buffer_fill: self.buffer.len(),
            wall_clock_s,
            q_loss: r.q_loss,
            policy_loss: r.policy_loss,
            entropy_coef: r.entropy_coef,
            mean_q: r.mean_q,
        }
    }

    pub fn checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::json!({
            "run": serde_json::to_value(&self.config)?,
            "episode": self.episode,
            "env_steps": self.env_steps,
        });
        self.learner.to_checkpoint_bytes(&meta)
    }
}

/// Restores a learner together with the run config it was trained under.
pub fn load_checkpoint(path: &Path) -> Result<(Sac<f64>, RunConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (sac, meta) = Sac::from_checkpoint_bytes(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    let run = meta
        .get("run")
        .cloned()
        .ok_or_else(|| Error::format(path, "checkpoint lacks its run config"))?;
    let config: RunConfig = serde_json::from_value(run).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((sac, config))
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub rows: Vec<MetricsRow>,
    pub dir: PathBuf,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Runs training to completion, writing `config.json`, `metrics.csv`,
/// checkpoints and `manifest.json` under `output_dir`. Nothing is written
/// if the config is invalid.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let started_at = now();
    let mut trainer = Trainer::new(config.clone())?;
    let dir = config.output_dir.clone();
    write_atomic(&dir.join(CONFIG_FILE), config.to_json().as_bytes())?;
    let metrics_path = dir.join(METRICS_FILE);
    let t0 = process_cpu_seconds();
    let elapsed = || {
        if config.record_timing {
            process_cpu_seconds() - t0
        } else {
            0.0
        }
    };
    let mut rows = Vec::new();
    while trainer.episode < config.total_episodes {
        trainer.run_episode()?;
        if trainer.episode % config.eval_every == 0 {
            let success = trainer.evaluate()?;
            rows.push(trainer.metrics_row(success, elapsed()));
            write_metrics(&metrics_path, &rows)?;
            log::info!(
                "{} seed {}: episode {} success {:.3}",
                config.name,
                config.seed,
                trainer.episode,
                success
            );
        }
        if trainer.episode % config.checkpoint_every == 0 && trainer.episode < config.total_episodes {
            let path = dir.join("checkpoints").join(format!("ep{:06}.ckpt", trainer.episode));
            write_atomic(&path, &trainer.checkpoint_bytes()?)?;
        }
    }
    let checkpoint = dir.join(FINAL_CHECKPOINT);
    write_atomic(&checkpoint, &trainer.checkpoint_bytes()?)?;
    let manifest = RunManifest {
        name: config.name.clone(),
        env_id: config.env.id.to_string(),
        config_hash: config.hash(),
        version: version_string(),
        seeds: Seeds {
            run: config.seed,
            db: config.db.seed,
        },
        started_at,
        finished_at: now(),
        episodes: trainer.episode,
        env_steps: trainer.env_steps,
        wall_clock_s: elapsed(),
        metrics: metrics_path,
        checkpoint,
    };
    write_atomic(
        &dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(RunOutcome { manifest, rows, dir })
}
