//! `synthrm` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or fatal error, 2 partial failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use synthrm::datasetio::{analyze_dataset, run_pipeline, validate_dataset, CampaignConfig, Stage};
use synthrm::Error;

#[derive(Parser)]
#[command(name = "synthrm", version, about = "Visible-surface aligned radio map synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// Campaign configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Campaign configuration whose output directory holds the dataset.
    #[arg(long, required_unless_present = "dataset")]
    config: Option<PathBuf>,
    /// Dataset root (directory containing manifest.json).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Accepted for interface uniformity; analysis is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory (analyze only); defaults to `<dataset>/analysis`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and their sidecar files.
    Generate(PipelineArgs),
    /// Generate scenes and render every view.
    Render(PipelineArgs),
    /// Render views and build the sensing graph with communities.
    Orchestrate(PipelineArgs),
    /// Simulate and export radio samples.
    Simulate(PipelineArgs),
    /// Full pipeline with samples grouped by perception community.
    Campaign(PipelineArgs),
    /// Statistics and semantic correlation over an exported dataset.
    Analyze(DatasetArgs),
    /// Re-check every file referenced by a dataset manifest.
    Validate(DatasetArgs),
}

fn exit_for(e: &Error) -> ExitCode {
    error!("{e}");
    ExitCode::from(1)
}

fn load(args: &PipelineArgs) -> Result<CampaignConfig, Error> {
    let mut cfg = CampaignConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn pipeline(args: &PipelineArgs, stage: Stage) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    match run_pipeline(&cfg, stage) {
        Ok(rep) => {
            info!(
                "{} scenes, {} samples written to {}",
                rep.manifest.scenes.len(),
                rep.manifest.samples.len(),
                rep.root.display()
            );
            if rep.failures() > 0 {
                for e in &rep.manifest.errors {
                    warn!("{}: {}", e.id, e.message);
                }
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => exit_for(&e),
    }
}

fn dataset_root(args: &DatasetArgs) -> Result<PathBuf, Error> {
    match (&args.dataset, &args.config) {
        (Some(d), _) => Ok(d.clone()),
        (None, Some(c)) => Ok(CampaignConfig::load(c)?.output_dir),
        (None, None) => Err(Error::Config("either --dataset or --config is required".into())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(a) => pipeline(a, Stage::Generate),
        Command::Render(a) => pipeline(a, Stage::Render),
        Command::Orchestrate(a) => pipeline(a, Stage::Orchestrate),
        Command::Simulate(a) => pipeline(a, Stage::Simulate),
        Command::Campaign(a) => pipeline(a, Stage::Campaign),
        Command::Analyze(a) => {
            let root = match dataset_root(a) {
                Ok(r) => r,
                Err(e) => return exit_for(&e),
            };
            let out = a.out.clone().unwrap_or_else(|| root.join("analysis"));
            match analyze_dataset(&root, &out) {
                Ok(rep) => {
                    info!("analyzed {} samples into {}", rep.samples, out.display());
                    if rep.skipped > 0 {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Validate(a) => {
            let root = match dataset_root(a) {
                Ok(r) => r,
                Err(e) => return exit_for(&e),
            };
            match validate_dataset(&root) {
                Ok(rep) if rep.is_ok() => {
                    info!("{} scenes and {} samples valid", rep.scenes_checked, rep.samples_checked);
                    ExitCode::SUCCESS
                }
                Ok(rep) => {
                    for p in &rep.problems {
                        warn!("{p}");
                    }
                    ExitCode::from(2)
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
