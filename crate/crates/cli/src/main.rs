use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use slu_denoise::harness::{
    emit_any, evaluate_checkpoints, prepare_data, read_data, run_cell, run_experiment, run_sweep, write_data,
    AnyReport, ExperimentConfig, RunOptions, SweepParam, Variant,
};

#[derive(Parser)]
#[command(name = "slu-denoise", version, about = "Denoising multi-source training for joint intent and slot models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Exec {
    /// Worker threads for independent cells (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Skip writing corpora, checkpoints and relabeled data.
    #[arg(long)]
    no_artifacts: bool,
}

impl Exec {
    fn options(&self) -> RunOptions {
        RunOptions { threads: self.threads, save_artifacts: !self.no_artifacts }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpora described by a config.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one variant for one seed.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Directory written by `gen-data`; data is generated when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "denoise_full")]
        variant: String,
        /// Defaults to the first seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score saved checkpoints on a JSONL corpus.
    Eval {
        /// Checkpoint directory, or a cell directory containing `checkpoints/`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run every variant and seed of a config.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        exec: Exec,
    },
    /// Repeat an experiment for several values of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// delta_max, models or gen_copies.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        exec: Exec,
    },
    /// Rebuild tables and curves from the logs of a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    match flag.or_else(|| cfg.output_dir.clone()) {
        Some(p) => Ok(p),
        None => bail!("no output directory: pass --out or set output_dir in the config"),
    }
}

fn print_summary(report: &AnyReport) {
    match report {
        AnyReport::Experiment(r) => {
            for s in &r.summaries {
                println!(
                    "{:<24} runs={} failed={} exact_match={:.4}±{:.4} slot_f1={:.4} intent_acc={:.4}",
                    s.variant.name(),
                    s.runs,
                    s.failed,
                    s.exact_match.mean,
                    s.exact_match.stdev,
                    s.slot_f1.mean,
                    s.intent_accuracy.mean
                );
            }
            println!("report written to {}", r.run_dir.display());
        }
        AnyReport::Sweep(s) => {
            for p in &s.points {
                for v in &p.report.summaries {
                    println!(
                        "{}={:<6} {:<24} exact_match={:.4}±{:.4}",
                        s.param.name(),
                        p.value,
                        v.variant.name(),
                        v.exact_match.mean,
                        v.exact_match.stdev
                    );
                }
            }
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let data = prepare_data(&cfg)?;
            write_data(&data, &out)?;
            for c in data.corpora.all() {
                println!("{:<12} {} instances", c.name, c.len());
            }
            println!("vocabulary   {} tokens", data.vocab.len());
        }
        Command::Train { config, out, data, variant, seed } => {
            let cfg = load_config(config.as_deref())?;
            let variant: Variant = variant.parse()?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let data = match data {
                Some(dir) => read_data(&dir)?,
                None => prepare_data(&cfg)?,
            };
            let result = run_cell(&cfg, &data, variant, seed, &out, true)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            if let Some(e) = result.error {
                bail!("training failed: {e}");
            }
        }
        Command::Eval { models, test } => {
            let nested = models.join("checkpoints");
            let dir = if nested.is_dir() { nested } else { models };
            let result = evaluate_checkpoints(&dir, &test)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Experiment { config, out, exec } => {
            let cfg = load_config(config.as_deref())?;
            let out = out_dir(out, &cfg)?;
            let report = run_experiment(&cfg, &out, exec.options())?;
            print_summary(&AnyReport::Experiment(report));
        }
        Command::Sweep { config, param, values, out, exec } => {
            let cfg = load_config(config.as_deref())?;
            let out = out_dir(out, &cfg)?;
            let param: SweepParam = param.parse()?;
            let report = run_sweep(&cfg, param, &values, &out, exec.options())?;
            print_summary(&AnyReport::Sweep(report));
        }
        Command::Report { run } => print_summary(&emit_any(&run)?),
    }
    Ok(())
}
