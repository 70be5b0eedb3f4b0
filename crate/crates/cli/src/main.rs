use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seadbs::agent::Variant;
use seadbs::harness::output::ensure_dir;
use seadbs::harness::report::{emit_calibration, emit_carrier, emit_parity, emit_seed_shift};
use seadbs::harness::{
    calibrate, plot_metrics, run_ablation, run_carrier_eval, run_quantization_parity, run_seed_shift_eval,
    run_training, ExperimentConfig,
};
use seadbs::quantizer::ModelCheckpoint;
use seadbs::{Error, Result};

#[derive(Parser)]
#[command(
    name = "seadbs",
    version,
    about = "Closed-loop DBS simulation, training and evaluation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training seed(s) for train/ablation, evaluation seed base otherwise.
    #[arg(long, global = true)]
    seed: Vec<u64>,
    /// baseline, baseline_pm, baseline_gs or sea_dbs.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check healthy/parkinsonian beta separation and stimulation efficacy.
    Calibrate,
    /// Train one variant on each seed.
    Train,
    /// Greedy rollouts with the environment re-seeded every n steps.
    EvalSeedshift {
        #[arg(long)]
        ckpt: Vec<PathBuf>,
        /// Seed-change intervals (defaults to the config's list).
        #[arg(long)]
        interval: Vec<usize>,
    },
    /// Greedy rollouts at one or more carrier frequencies.
    EvalCarrier {
        #[arg(long)]
        ckpt: PathBuf,
        /// Carrier frequencies in Hz (defaults to the config's list).
        #[arg(long)]
        freq: Vec<f64>,
    },
    /// Train all four variants on shared seeds.
    Ablation {
        /// Episodes averaged for the final ranking.
        #[arg(long, default_value_t = 10)]
        final_window: usize,
    },
    /// Round every checkpoint parameter to IEEE binary16.
    Quantize { input: PathBuf, output: PathBuf },
    /// Compare fp32 and fp16 copies of a checkpoint on identical rollouts.
    Parity {
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Beta and reward curves from a training log or ablation CSV.
    Plot { input: PathBuf },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &common.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn with_training_seeds(mut cfg: ExperimentConfig, seeds: &[u64]) -> ExperimentConfig {
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    cfg
}

fn with_eval_seed(mut cfg: ExperimentConfig, seeds: &[u64]) -> Result<ExperimentConfig> {
    match seeds {
        [] => {}
        [s] => cfg.eval.seed = *s,
        _ => return Err(Error::Config("evaluation takes a single --seed".into())),
    }
    Ok(cfg)
}

fn ckpt_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into())
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Calibrate => {
            let report = calibrate(
                &cfg.network,
                &cfg.stim,
                &cfg.calibration,
                cfg.training.episode.analysis_window_ms,
            )?;
            ensure_dir(&out)?;
            emit_calibration(&out.join("calibration.csv"), &report)?;
            println!(
                "parkinsonian above threshold {}/{}, healthy below {}/{}, stimulation effective {}/{}, separation p = {:.3e}",
                report.parkinsonian_above(),
                report.seeds(),
                report.healthy_below(),
                report.seeds(),
                report.stimulation_effective(),
                report.seeds(),
                report.separation.map_or(f64::NAN, |m| m.p)
            );
            report.ensure_passed()
        }
        Command::Train => {
            let cfg = with_training_seeds(cfg, &common.seed);
            let agents = run_training(&cfg, cfg.variant, &cfg.seeds, &out)?;
            for a in agents {
                println!(
                    "{} seed {}: final 10-episode mean beta {:.4}",
                    a.variant,
                    a.seed,
                    a.metrics.final_mean_beta(10).unwrap_or(f64::NAN)
                );
            }
            Ok(())
        }
        Command::EvalSeedshift { ckpt, interval } => {
            let mut cfg = with_eval_seed(cfg, &common.seed)?;
            if !interval.is_empty() {
                cfg.eval.intervals = interval;
            }
            if ckpt.is_empty() {
                return Err(Error::Config("eval-seedshift needs at least one --ckpt".into()));
            }
            ensure_dir(&out)?;
            for path in ckpt {
                let c = ModelCheckpoint::load(&path)?;
                let rows = run_seed_shift_eval(
                    &c.load_for_inference(),
                    &cfg.network,
                    &cfg.stim,
                    &c.training,
                    &cfg.eval,
                )?;
                emit_seed_shift(
                    &out.join(format!("seedshift_{}.csv", ckpt_stem(&path))),
                    c.variant,
                    c.seed,
                    &rows,
                )?;
                for r in rows {
                    println!(
                        "{} seed {} n={}: mean beta {:.4}, mean reward {:.4}",
                        c.variant, c.seed, r.interval, r.mean_beta_psd, r.mean_reward
                    );
                }
            }
            Ok(())
        }
        Command::EvalCarrier { ckpt, freq } => {
            let cfg = with_eval_seed(cfg, &common.seed)?;
            let freqs = if freq.is_empty() {
                cfg.eval.carrier_freqs.clone()
            } else {
                freq
            };
            let c = ModelCheckpoint::load(&ckpt)?;
            let nets = c.load_for_inference();
            let results = freqs
                .iter()
                .map(|f| run_carrier_eval(&nets, &cfg.network, &cfg.stim, &c.training, &cfg.eval, *f))
                .collect::<Result<Vec<_>>>()?;
            emit_carrier(&out, &results)?;
            for r in &results {
                println!(
                    "{} Hz: mean beta {:.4}, unstimulated {:.4}, suppression {:.4}",
                    r.freq_hz,
                    r.mean_beta(),
                    r.unstimulated_mean_beta(),
                    r.suppression()
                );
            }
            Ok(())
        }
        Command::Ablation { final_window } => {
            let cfg = with_training_seeds(cfg, &common.seed);
            let result = run_ablation(&cfg, &out, final_window)?;
            for v in Variant::ALL {
                println!(
                    "{v}: final {final_window}-episode mean beta {:.4}",
                    result.final_mean_beta(v).unwrap_or(f64::NAN)
                );
            }
            Ok(())
        }
        Command::Quantize { input, output } => {
            let c = ModelCheckpoint::load(&input)?;
            let q = c.quantize_fp16()?;
            q.save(&output)?;
            println!(
                "payload {} -> {} bytes ({:.4})",
                c.payload_bytes(),
                q.payload_bytes(),
                q.payload_bytes() as f64 / c.payload_bytes() as f64
            );
            Ok(())
        }
        Command::Parity { ckpt } => {
            let cfg = with_eval_seed(cfg, &common.seed)?;
            let c = ModelCheckpoint::load(&ckpt)?;
            let result = run_quantization_parity(&c, &cfg.network, &cfg.stim, &c.training, &cfg.eval)?;
            emit_parity(&out, &result)?;
            let s = &result.summary;
            println!(
                "payload ratio {:.4}, mean beta fp32 {:.4} fp16 {:.4} (relative difference {:.2e}), action agreement {:.3}",
                s.payload_ratio, s.mean_beta_fp32, s.mean_beta_fp16, s.relative_difference, s.action_agreement
            );
            Ok(())
        }
        Command::Plot { input } => {
            for p in plot_metrics(&input, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            error_line("usage", e.to_string().lines().next().unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
