//! `his-lab`: record databases, train, evaluate, sweep seeds, and report.
//!
//! Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
//! Every command that writes files prints their paths, space separated, as
//! the last line of standard output.

mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use his_lab::envs::generate_recorded_db;
use his_lab::experiment::{
    aggregate, evaluate, load_checkpoint, load_db, run, RunConfig, Summary, COUNTER_EPISODE, MANIFEST_FILE,
};
use his_lab::io::write_atomic;
use his_lab::learner::Deterministic;
use his_lab::{make_env, EnvConfig, EnvId};

/// Environment variable naming the root that relative output paths resolve
/// against. Defaults to `runs`.
const OUT_VAR: &str = "HIS_LAB_OUT";

#[derive(Parser)]
#[command(name = "his-lab", version, about = "Hindsight-state relabeling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a recorded virtual-object database.
    Record {
        #[arg(long)]
        env: EnvId,
        /// Number of entries.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Train one run from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Evaluate the deterministic policy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        episodes: u64,
        /// Evaluation seed; defaults to the run's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one run per seed under `<output_dir>/run_s<seed>`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        seeds: Vec<u64>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
    /// Summarise runs into a CSV table and SVG plots.
    Report {
        /// Run directories, or directories containing run directories.
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output_root() -> PathBuf {
    std::env::var_os(OUT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        output_root().join(path)
    }
}

fn print_paths(paths: &[PathBuf]) {
    let s: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    println!("{}", s.join(" "));
}

fn record(env: EnvId, n: u64, seed: u64, out: &Path, force: bool) -> Result<()> {
    if out.exists() && !force {
        bail!("{} exists; pass --force to overwrite", out.display());
    }
    let env = make_env::<f64>(&EnvConfig::new(env))?;
    let db = generate_recorded_db(&env, n as usize, seed)?;
    db.write(out)?;
    println!(
        "recorded {} entries of {} states for {}",
        db.len(),
        db.entry_len(),
        env.id()
    );
    print_paths(&[out.to_path_buf()]);
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.output_dir = resolve(&cfg.output_dir);
    Ok(cfg)
}

fn train_one(cfg: &RunConfig) -> Result<PathBuf> {
    let out = run(cfg).with_context(|| format!("run {} seed {}", cfg.name, cfg.seed))?;
    if let Some(last) = out.rows.last() {
        println!(
            "{} seed {}: {} episodes, {} env steps, final success {:.3}",
            cfg.name, cfg.seed, last.episode, last.env_steps, last.success_rate
        );
    }
    Ok(out.dir)
}

fn eval(checkpoint: &Path, episodes: u64, seed: Option<u64>) -> Result<()> {
    let (sac, cfg) = load_checkpoint(checkpoint)?;
    let env = make_env::<f64>(&cfg.env)?;
    let db = load_db(&cfg, &env)?;
    let rate = evaluate(
        &Deterministic(&sac),
        &env,
        db.as_ref(),
        episodes as usize,
        seed.unwrap_or(cfg.seed),
    )?;
    println!("{rate}");
    Ok(())
}

fn sweep(config: &Path, seeds: &[u64], jobs: usize) -> Result<()> {
    let base = load_config(config, None)?;
    let cfgs: Vec<RunConfig> = seeds
        .iter()
        .map(|&s| RunConfig {
            seed: s,
            output_dir: base.output_dir.join(format!("run_s{s}")),
            ..base.clone()
        })
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PathBuf>>>> = Mutex::new((0..cfgs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(cfgs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = cfgs.get(i) else { break };
                let r = train_one(cfg);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut dirs = Vec::new();
    for r in results.into_inner().expect("threads joined") {
        dirs.push(r.expect("every run executed")?);
    }
    print_paths(&dirs);
    Ok(())
}

/// Run directories under `path`: itself if it holds a manifest, else its
/// subdirectories that do, in name order.
fn collect_runs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.join(MANIFEST_FILE).is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut found: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        bail!("{} contains no completed runs", path.display());
    }
    Ok(found)
}

fn charts(summary: &Summary) -> (String, String) {
    let series: Vec<svg::Series> = summary
        .variants
        .iter()
        .map(|v| svg::Series {
            label: v.name.clone(),
            points: v
                .episodes
                .iter()
                .map(|&e| e as f64)
                .zip(v.smoothed_mean.iter().copied())
                .collect(),
            spread: Some(v.std.clone()),
        })
        .collect();
    let curves = svg::line_chart(
        &format!("{}: smoothed success", summary.env_id),
        "episode",
        "success rate",
        &series,
    );
    let bars: Vec<svg::Bar> = summary
        .variants
        .iter()
        .map(|v| svg::Bar {
            label: v.name.clone(),
            value: v.counter_at_1000.unwrap_or(0.0),
            error: v.counter_at_1000_std.unwrap_or(0.0),
        })
        .collect();
    let counter = svg::bar_chart(
        &format!(
            "{}: successful non-trivial trajectories, first {COUNTER_EPISODE} episodes",
            summary.env_id
        ),
        "trajectories inserted",
        &bars,
    );
    (curves, counter)
}

fn report(runs: &[PathBuf], out: &Path) -> Result<()> {
    let mut dirs = Vec::new();
    for r in runs {
        dirs.extend(collect_runs(r)?);
    }
    let summary = aggregate(&dirs)?;
    let csv = summary.to_csv();
    let (curves, counter) = charts(&summary);
    let paths = [out.join("summary.csv"), out.join("curves.svg"), out.join("counter.svg")];
    for (p, body) in paths.iter().zip([&csv, &curves, &counter]) {
        write_atomic(p, body.as_bytes())?;
    }
    print!("{csv}");
    print_paths(&paths);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Record {
            env,
            n,
            seed,
            out,
            force,
        } => record(env, n, seed, &out, force),
        Command::Train { config, seed_override } => {
            let cfg = load_config(&config, seed_override)?;
            let dir = train_one(&cfg)?;
            print_paths(&[dir]);
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => eval(&checkpoint, episodes, seed),
        Command::Sweep { config, seeds, jobs } => sweep(&config, &seeds, jobs as usize),
        Command::Report { runs, out } => report(&runs, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
