use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use boot_np::checkpoint::Checkpoint;
use boot_np::experiment::{run_ablation, Matrix};
use boot_np::metrics::mean_std;
use boot_np::report::{report, ReportOptions};
use boot_np::trainer::{evaluate, train};
use boot_np::{Stream, StreamRng, TrainConfig};

#[derive(Parser)]
#[command(name = "bootnp", version, about = "Bootstrapped DQN with noisy targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; desk defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self, fallback: Option<&Path>) -> anyhow::Result<TrainConfig> {
        let mut cfg = match self.config.as_deref().or(fallback) {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one run; writes config.txt, metrics.csv and checkpoints.
    Train(Common),
    /// Evaluate a checkpoint with the ensemble vote.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/final.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
    },
    /// Score tables, profiles and curves over finished run directories.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Evaluations pooled into the final mean and std.
        #[arg(long, default_value_t = 1)]
        final_window: usize,
    },
    /// Run an ablation matrix and report on it.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(common) => {
            let cfg = common.resolve(None)?;
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.label, cfg.seed)));
            let run = train(&cfg, Some(&out))?;
            println!(
                "{} frames, {} evaluations, written to {}",
                run.checkpoint.frames,
                run.metrics.rows.len(),
                out.display()
            );
            if let Some(last) = run.metrics.rows.last() {
                println!(
                    "last evaluation: mean {} (optimal {})",
                    last.mean, run.spec.optimal_return
                );
            }
        }
        Command::Eval {
            common,
            checkpoint,
            episodes,
        } => {
            let run_cfg = common.out.as_ref().map(|o| o.join("config.txt"));
            let cfg = common.resolve(run_cfg.as_deref().filter(|p| p.exists()))?;
            let path = match (checkpoint, &common.out) {
                (Some(p), _) => p,
                (None, Some(o)) => o.join("final.bin"),
                (None, None) => bail!("give --checkpoint or --out <run dir>"),
            };
            let ckpt = Checkpoint::load(&path)
                .with_context(|| format!("loading {}", path.display()))?;
            let dynamics = cfg.env.build()?;
            let mut rng = StreamRng::new(cfg.seed, Stream::EvalSeeds);
            let returns = evaluate(
                &ckpt.pair.policy,
                &dynamics,
                episodes,
                cfg.env.noop_max,
                &mut rng,
            )?;
            let (mean, std) = mean_std(&returns);
            for (i, r) in returns.iter().enumerate() {
                println!("episode {i}: {r}");
            }
            println!("mean {mean} std {std}");
        }
        Command::Report {
            common,
            runs,
            final_window,
        } => {
            let out = common.out.unwrap_or_else(|| PathBuf::from("report"));
            let opts = ReportOptions {
                final_window,
                ..Default::default()
            };
            let rep = report(&runs, &out, &opts)?;
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Experiment {
            common,
            matrix,
            jobs,
        } => {
            let base = common.resolve(None)?;
            let m = Matrix::load(&matrix)?;
            let out = common.out.unwrap_or_else(|| PathBuf::from("experiment"));
            let res = run_ablation(&base, &m, Some(&out), jobs, &ReportOptions::default())?;
            for row in res.scores() {
                println!(
                    "{} seed {}: max {} normalized {:.3}",
                    row.variant, row.seed, row.max_score, row.normalized
                );
            }
            let failed: Vec<_> = res.failures().collect();
            for c in &failed {
                eprintln!("{} seed {} failed: {}", c.variant, c.seed, c.outcome.as_ref().unwrap_err());
            }
            println!("report written to {}", out.display());
            if !failed.is_empty() {
                bail!("{} of {} cells failed", failed.len(), res.cells.len());
            }
        }
    }
    Ok(())
}
