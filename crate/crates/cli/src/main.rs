use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use figr_cli::evaluate::{eval_csv, evaluate, EvalOptions};
use figr_cli::generate::{generate, GenerateOptions, TaskSource};
use figr_cli::gradcheck::gradcheck;
use figr_cli::pack::{pack, stats, stats_of, stats_text};
use figr_cli::train::{train, TrainOptions};
use figr_cli::RunConfig;

/// Few-shot image generation with Reptile meta-trained GANs.
#[derive(Parser)]
#[command(name = "figr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Total outer steps, overriding `meta_steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Checkpoint to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adapt to a few images and sample from the adapted generator.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Class of the checkpoint's dataset, by name or id.
        #[arg(long, conflicts_with = "images")]
        class: Option<String>,
        /// Directory of PGM conditioning images.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare adaptation from the checkpoint and from a random init on
    /// validation classes.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pack class directories of PGM files into an FGR8 shard.
    Pack { input: PathBuf, output: PathBuf },
    /// Class and image counts of an FGR8 shard.
    Stats { shard: PathBuf },
    /// Finite-difference checks of every gradient path.
    Gradcheck {
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        flip_sign: bool,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, steps, resume, out } => {
            let cfg = RunConfig::load(&config)?;
            let summary = train(&cfg, &TrainOptions { steps, resume, out })?;
            println!("trained to step {} in {}", summary.final_step, summary.output_dir.display());
        }
        Command::Generate { checkpoint, class, images, n, k, count, seed, out } => {
            let source = images.map(TaskSource::Images).unwrap_or(TaskSource::Class(class));
            let opts = GenerateOptions { source, n: n as usize, k: k as usize, count: count as usize, seed, out };
            let written = generate(&checkpoint, &opts)?;
            println!("{}\n{}", written.montage.display(), written.shard.display());
        }
        Command::Eval { checkpoint, trials, samples, seed, out } => {
            let (ds, reports) = evaluate(&checkpoint, &EvalOptions { trials, samples: samples as usize, seed })?;
            let csv = eval_csv(&ds, &reports);
            match out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Pack { input, output } => {
            let classes = pack(&input, &output)?;
            print!("{}", stats_text(&stats_of(&classes)));
        }
        Command::Stats { shard } => print!("{}", stats_text(&stats(&shard)?)),
        Command::Gradcheck { trials, seed, flip_sign } => {
            let report = gradcheck(trials as usize, seed, flip_sign)?;
            print!("{}", report.text());
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("FIGR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("FIGR_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
