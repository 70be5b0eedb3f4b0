use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate, CalibrationReport};
use super::config::ExperimentConfig;
use super::output::{ensure_dir, line_plot, write_csv, Series};
use crate::agent::{train, RunMetrics, StepRecord, TrainedAgent, Variant};
use crate::error::{Error, Result};
use crate::quantizer::ModelCheckpoint;

/// Runs the calibration check and refuses to continue when it fails.
pub fn require_calibration(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    let report = calibrate(
        &cfg.network,
        &cfg.stim,
        &cfg.calibration,
        cfg.training.episode.analysis_window_ms,
    )?;
    report.ensure_passed()?;
    Ok(report)
}

pub fn metrics_file(seed: u64) -> String {
    format!("train_metrics_{seed}.csv")
}

pub fn episodes_file(seed: u64) -> String {
    format!("train_episodes_{seed}.csv")
}

pub fn checkpoint_file(seed: u64) -> String {
    format!("checkpoint_{seed}.ckpt")
}

/// Writes the per-step log, the per-episode aggregates and the checkpoint
/// of one trained agent into `dir`.
pub fn emit_training(dir: &Path, agent: &TrainedAgent, cfg: &ExperimentConfig) -> Result<()> {
    if agent.metrics.is_empty() {
        return Err(Error::EmptyMetrics("training metrics"));
    }
    ensure_dir(dir)?;
    write_csv(
        &dir.join(metrics_file(agent.seed)),
        &agent.metrics.rows,
        "training metrics",
    )?;
    write_csv(
        &dir.join(episodes_file(agent.seed)),
        &agent.metrics.episodes(),
        "episode summaries",
    )?;
    ModelCheckpoint::new(
        agent.nets.clone(),
        agent.variant,
        agent.seed,
        cfg.training.clone(),
    )
    .save(&dir.join(checkpoint_file(agent.seed)))
}

/// Trains `variant` on every seed, writing outputs under `out`. A failed
/// seed leaves a `FAILED_<seed>.txt` marker next to the partial outputs.
pub fn run_training(
    cfg: &ExperimentConfig,
    variant: Variant,
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<TrainedAgent>> {
    cfg.validate()?;
    require_calibration(cfg)?;
    train_seeds(cfg, variant, seeds, out)
}

fn train_seeds(
    cfg: &ExperimentConfig,
    variant: Variant,
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<TrainedAgent>> {
    ensure_dir(out)?;
    let mut agents = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let result = train(&cfg.network, &cfg.stim, &cfg.training, variant, seed)
            .and_then(|agent| emit_training(out, &agent, cfg).map(|_| agent));
        match result {
            Ok(agent) => agents.push(agent),
            Err(e) => {
                let marker = out.join(format!("FAILED_{seed}.txt"));
                let _ = std::fs::write(&marker, format!("{e}\n"));
                return Err(e);
            }
        }
    }
    Ok(agents)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEpisodeRow {
    pub variant: Variant,
    pub seed: u64,
    pub episode: usize,
    pub mean_beta: f64,
    pub cumulative_reward: f64,
    pub stim_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummaryRow {
    pub variant: Variant,
    pub seed: u64,
    pub final_mean_beta: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub agents: BTreeMap<Variant, Vec<TrainedAgent>>,
    pub final_window: usize,
}

impl AblationResult {
    /// Seed-averaged mean beta over the last `final_window` episodes.
    pub fn final_mean_beta(&self, variant: Variant) -> Option<f64> {
        let agents = self.agents.get(&variant)?;
        let v: Vec<f64> = agents
            .iter()
            .filter_map(|a| a.metrics.final_mean_beta(self.final_window))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn episode_rows(&self) -> Vec<AblationEpisodeRow> {
        let mut rows = Vec::new();
        for (variant, agents) in &self.agents {
            for a in agents {
                for e in a.metrics.episodes() {
                    rows.push(AblationEpisodeRow {
                        variant: *variant,
                        seed: a.seed,
                        episode: e.episode,
                        mean_beta: e.mean_beta,
                        cumulative_reward: e.cumulative_reward,
                        stim_fraction: e.stim_fraction,
                    });
                }
            }
        }
        rows
    }

    /// Per-seed final-window beta with the variant's rank among the four
    /// on that seed (1 = lowest beta).
    pub fn summary_rows(&self) -> Vec<AblationSummaryRow> {
        let mut rows = Vec::new();
        let seeds: Vec<u64> = self
            .agents
            .values()
            .next()
            .map(|a| a.iter().map(|x| x.seed).collect())
            .unwrap_or_default();
        for seed in seeds {
            let mut per: Vec<(Variant, f64)> = self
                .agents
                .iter()
                .filter_map(|(v, agents)| {
                    let a = agents.iter().find(|a| a.seed == seed)?;
                    Some((*v, a.metrics.final_mean_beta(self.final_window)?))
                })
                .collect();
            let mut order: Vec<f64> = per.iter().map(|p| p.1).collect();
            order.sort_by(f64::total_cmp);
            per.sort_by_key(|p| p.0);
            for (variant, beta) in per {
                let rank = order.iter().position(|b| *b == beta).unwrap() + 1;
                rows.push(AblationSummaryRow {
                    variant,
                    seed,
                    final_mean_beta: beta,
                    rank,
                });
            }
        }
        rows
    }
}

/// Trains all four variants on the shared seeds.
pub fn run_ablation(cfg: &ExperimentConfig, out: &Path, final_window: usize) -> Result<AblationResult> {
    cfg.validate()?;
    require_calibration(cfg)?;
    let mut agents = BTreeMap::new();
    for variant in Variant::ALL {
        let dir = out.join(variant.name());
        agents.insert(variant, train_seeds(cfg, variant, &cfg.seeds, &dir)?);
    }
    let result = AblationResult { agents, final_window };
    write_csv(
        &out.join("ablation.csv"),
        &result.episode_rows(),
        "ablation curves",
    )?;
    write_csv(
        &out.join("ablation_summary.csv"),
        &result.summary_rows(),
        "ablation summary",
    )?;
    Ok(result)
}

/// Reads a training log written by `emit_training`.
pub fn read_metrics(path: &Path) -> Result<RunMetrics> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let rows = r
        .deserialize::<StepRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(RunMetrics { rows })
}

fn read_ablation(path: &Path) -> Result<Vec<AblationEpisodeRow>> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize::<AblationEpisodeRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Beta-vs-episode and reward-vs-episode SVGs from a training log or an
/// ablation CSV. Returns the written paths.
pub fn plot_metrics(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let headers = csv::Reader::from_path(input)
        .and_then(|mut r| r.headers().cloned())
        .map_err(|e| Error::Config(format!("{}: {e}", input.display())))?;
    let (beta, reward): (Vec<Series>, Vec<Series>) = if headers.iter().any(|h| h == "variant") {
        let rows = read_ablation(input)?;
        let mut by_variant: BTreeMap<Variant, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
        for r in rows {
            let e = by_variant
                .entry(r.variant)
                .or_default()
                .entry(r.episode)
                .or_default();
            e.0 += r.mean_beta;
            e.1 += r.cumulative_reward;
            e.2 += 1;
        }
        by_variant
            .into_iter()
            .map(|(v, eps)| {
                let b = eps.iter().map(|(k, e)| (*k as f64, e.0 / e.2 as f64)).collect();
                let r = eps.iter().map(|(k, e)| (*k as f64, e.1 / e.2 as f64)).collect();
                (
                    Series {
                        label: v.name().into(),
                        points: b,
                    },
                    Series {
                        label: v.name().into(),
                        points: r,
                    },
                )
            })
            .unzip()
    } else {
        let eps = read_metrics(input)?.episodes();
        (
            vec![Series {
                label: "beta".into(),
                points: eps.iter().map(|e| (e.episode as f64, e.mean_beta)).collect(),
            }],
            vec![Series {
                label: "reward".into(),
                points: eps
                    .iter()
                    .map(|e| (e.episode as f64, e.cumulative_reward))
                    .collect(),
            }],
        )
    };
    if beta.iter().all(|s| s.points.is_empty()) {
        return Err(Error::EmptyMetrics("plot input"));
    }
    ensure_dir(out)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    let beta_path = out.join(format!("{stem}_beta.svg"));
    let reward_path = out.join(format!("{stem}_reward.svg"));
    line_plot(&beta_path, "Relative beta power", "episode", "mean beta", &beta)?;
    line_plot(
        &reward_path,
        "Episode reward",
        "episode",
        "cumulative reward",
        &reward,
    )?;
    Ok(vec![beta_path, reward_path])
}
