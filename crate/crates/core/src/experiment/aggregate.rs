//! Cross-seed summaries of completed runs.

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::metrics::{read_metrics, MetricsRow};
use super::run::{RunManifest, CONFIG_FILE, MANIFEST_FILE, METRICS_FILE};
use crate::error::{Error, Result};

/// Smoothing window for success curves, in episodes.
pub const SMOOTHING_WINDOW: usize = 200;
/// Training prefix over which the successful-trajectory counter is compared.
pub const COUNTER_EPISODE: usize = 1000;

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: RunManifest,
    pub rows: Vec<MetricsRow>,
}

pub fn load_run(dir: &Path) -> Result<RunRecord> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    let rows = read_metrics(&dir.join(METRICS_FILE))?;
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        config,
        manifest,
        rows,
    })
}

/// Trailing mean of `(episode, value)` points over the last `window`
/// episodes, evaluated at every point.
pub fn smooth(curve: &[(usize, f64)], window: usize) -> Vec<(usize, f64)> {
    curve
        .iter()
        .map(|&(e, _)| {
            let inside: Vec<f64> = curve
                .iter()
                .filter(|&&(x, _)| x <= e && x + window > e)
                .map(|&(_, v)| v)
                .collect();
            (e, inside.iter().sum::<f64>() / inside.len() as f64)
        })
        .collect()
}

/// First episode at which `curve` reaches `target`.
pub fn episodes_to_match(curve: &[(usize, f64)], target: f64) -> Option<usize> {
    curve.iter().find(|&&(_, v)| v >= target).map(|&(e, _)| e)
}

pub fn success_curve(rows: &[MetricsRow]) -> Vec<(usize, f64)> {
    rows.iter().map(|r| (r.episode, r.success_rate)).collect()
}

/// Counter value at the last evaluation point not after `episode`.
pub fn counter_at(rows: &[MetricsRow], episode: usize) -> Option<usize> {
    rows.iter()
        .filter(|r| r.episode <= episode)
        .last()
        .map(|r| r.successful_nontrivial_count)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub name: String,
    pub seeds: Vec<u64>,
    pub episodes: Vec<usize>,
    /// Seed mean and population standard deviation of success per point.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub smoothed_mean: Vec<f64>,
    pub final_smoothed: f64,
    pub final_smoothed_std: f64,
    pub wall_clock_s: f64,
    pub env_steps: f64,
    pub counter_at_1000: Option<f64>,
    pub counter_at_1000_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchRow {
    pub variant: String,
    /// First episode at which the variant reaches the baseline's final
    /// smoothed success.
    pub episodes_to_match: Option<usize>,
    /// `episodes_to_match` over the baseline's episode count.
    pub fraction_of_baseline: Option<f64>,
    pub wall_clock_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub env_id: String,
    pub baseline: String,
    pub variants: Vec<VariantSummary>,
    pub matches: Vec<MatchRow>,
}

impl Summary {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn matching(&self, name: &str) -> Option<&MatchRow> {
        self.matches.iter().find(|m| m.variant == name)
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        let mut out = String::from(
            "variant,seeds,final_smoothed_success,final_smoothed_std,episodes_to_match,fraction_of_baseline,wall_clock_s,wall_clock_ratio,counter_at_1000,counter_at_1000_std\n",
        );
        for v in &self.variants {
            let m = self.matching(&v.name).expect("one match row per variant");
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{},{},{:.3},{:.6},{},{}\n",
                v.name,
                v.seeds.len(),
                v.final_smoothed,
                v.final_smoothed_std,
                m.episodes_to_match.map_or(String::new(), |e| e.to_string()),
                opt(m.fraction_of_baseline),
                v.wall_clock_s,
                m.wall_clock_ratio,
                opt(v.counter_at_1000),
                opt(v.counter_at_1000_std),
            ));
        }
        out
    }
}

pub fn aggregate(dirs: &[PathBuf]) -> Result<Summary> {
    let records = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    aggregate_records(&records, None)
}

/// Groups runs by variant name. The baseline is `baseline` if given, else
/// the variant called `vanilla`, else the first variant seen.
pub fn aggregate_records(records: &[RunRecord], baseline: Option<&str>) -> Result<Summary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Aggregation("no runs to aggregate".into()))?;
    let env_id = first.config.env.id;
    if let Some(r) = records.iter().find(|r| r.config.env.id != env_id) {
        return Err(Error::Aggregation(format!(
            "runs mix environments: {} has {}, {} has {}",
            first.dir.display(),
            env_id,
            r.dir.display(),
            r.config.env.id
        )));
    }
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.config.name.as_str()) {
            names.push(&r.config.name);
        }
    }
    let mut variants = Vec::new();
    for name in &names {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.config.name == *name).collect();
        variants.push(summarise_variant(name, &runs)?);
    }
    let baseline = match baseline {
        Some(b) => b.to_string(),
        None if names.contains(&"vanilla") => "vanilla".to_string(),
        None => names[0].to_string(),
    };
    let base = variants
        .iter()
        .find(|v| v.name == baseline)
        .ok_or_else(|| Error::Aggregation(format!("baseline variant {baseline} not among the runs")))?
        .clone();
    let base_episodes = *base.episodes.last().expect("nonempty curve") as f64;
    let matches = variants
        .iter()
        .map(|v| {
            let curve: Vec<(usize, f64)> = v
                .episodes
                .iter()
                .copied()
                .zip(v.smoothed_mean.iter().copied())
                .collect();
            let e = episodes_to_match(&curve, base.final_smoothed);
            MatchRow {
                variant: v.name.clone(),
                episodes_to_match: e,
                fraction_of_baseline: e.map(|e| e as f64 / base_episodes),
                wall_clock_ratio: if base.wall_clock_s > 0.0 {
                    v.wall_clock_s / base.wall_clock_s
                } else {
                    f64::NAN
                },
            }
        })
        .collect();
    Ok(Summary {
        env_id: env_id.to_string(),
        baseline,
        variants,
        matches,
    })
}

fn summarise_variant(name: &str, runs: &[&RunRecord]) -> Result<VariantSummary> {
    let episodes: Vec<usize> = runs[0].rows.iter().map(|r| r.episode).collect();
    if episodes.is_empty() {
        return Err(Error::Aggregation(format!(
            "{} has no metrics rows",
            runs[0].dir.display()
        )));
    }
    for r in runs {
        let e: Vec<usize> = r.rows.iter().map(|r| r.episode).collect();
        if e != episodes {
            return Err(Error::Aggregation(format!(
                "runs of variant {name} were evaluated at different episodes ({})",
                r.dir.display()
            )));
        }
    }
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for i in 0..episodes.len() {
        let xs: Vec<f64> = runs.iter().map(|r| r.rows[i].success_rate).collect();
        let (m, s) = mean_std(&xs);
        mean.push(m);
        std.push(s);
    }
    let curve: Vec<(usize, f64)> = episodes.iter().copied().zip(mean.iter().copied()).collect();
    let smoothed_mean: Vec<f64> = smooth(&curve, SMOOTHING_WINDOW).into_iter().map(|(_, v)| v).collect();
    let finals: Vec<f64> = runs
        .iter()
        .map(|r| {
            smooth(&success_curve(&r.rows), SMOOTHING_WINDOW)
                .last()
                .expect("nonempty")
                .1
        })
        .collect();
    let (_, final_smoothed_std) = mean_std(&finals);
    let walls: Vec<f64> = runs
        .iter()
        .map(|r| r.rows.last().expect("nonempty").wall_clock_s)
        .collect();
    let steps: Vec<f64> = runs
        .iter()
        .map(|r| r.rows.last().expect("nonempty").env_steps as f64)
        .collect();
    let counters: Option<Vec<f64>> = if episodes.last().copied().unwrap_or(0) >= COUNTER_EPISODE {
        runs.iter()
            .map(|r| counter_at(&r.rows, COUNTER_EPISODE).map(|c| c as f64))
            .collect()
    } else {
        None
    };
    let counter_stats = counters.as_deref().map(mean_std);
    Ok(VariantSummary {
        name: name.to_string(),
        seeds: runs.iter().map(|r| r.config.seed).collect(),
        final_smoothed: *smoothed_mean.last().expect("nonempty"),
        final_smoothed_std,
        smoothed_mean,
        episodes,
        mean,
        std,
        wall_clock_s: mean_std(&walls).0,
        env_steps: mean_std(&steps).0,
        counter_at_1000: counter_stats.map(|s| s.0),
        counter_at_1000_std: counter_stats.map(|s| s.1),
    })
}
