use std::path::PathBuf;

use anyhow::{Context, Result};
use caninesynth::config::{save_asset_pack, GenerationConfig};
use caninesynth::core::assets::{procedural_assets, ProceduralAssetConfig};
use caninesynth::core::eval::DEFAULT_T0;
use caninesynth::core::placement::derive_bbox_stats;
use caninesynth::dataset::generate_dataset;
use caninesynth::evaluate::{evaluate_dirs, write_report_csv, write_report_json};
use caninesynth::formats::stats::{load_annotations, save_stats};
use clap::{Parser, Subcommand};
use log::{info, warn};

#[derive(Parser)]
#[command(
    name = "caninesynth",
    version,
    about = "Synthetic dog datasets and segmentation evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset.
    Generate {
        /// TOML or JSON generation config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's sample count.
        #[arg(long)]
        count: Option<u64>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Asset pack commands.
    Assets {
        #[command(subcommand)]
        command: AssetsCommand,
    },
    /// Placement statistics commands.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Score predicted heatmaps or masks against ground-truth masks.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Initial threshold for heatmap binarization.
        #[arg(long, default_value_t = DEFAULT_T0)]
        t0: f64,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// CSV report path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AssetsCommand {
    /// Write the procedural asset pack.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML or JSON procedural asset config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Build bounding-box statistics from JSON-lines joint annotations.
    Derive {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_procedural_config(path: &PathBuf) -> Result<ProceduralAssetConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            out,
            count,
            seed,
            workers,
        } => {
            let mut cfg = match &config {
                Some(p) => GenerationConfig::load(p)?,
                None => GenerationConfig::default(),
            };
            if let Some(c) = count {
                cfg.count = c;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let assets = cfg.build_assets().context("building assets")?;
            let summary = generate_dataset(&cfg, &assets, &out, workers)?;
            println!(
                "{}: {} generated, {} already present",
                out.display(),
                summary.generated,
                summary.skipped
            );
        }
        Command::Assets {
            command: AssetsCommand::Synth { out, config, seed },
        } => {
            let mut cfg = match &config {
                Some(p) => load_procedural_config(p)?,
                None => ProceduralAssetConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let assets = procedural_assets(&cfg)?;
            save_asset_pack(&assets, &out)?;
            println!("asset pack written to {}", out.display());
        }
        Command::Stats {
            command: StatsCommand::Derive { annotations, out },
        } => {
            let records = load_annotations(&annotations)?;
            let (stats, skipped) = derive_bbox_stats(&records)?;
            if skipped > 0 {
                warn!("{skipped} annotation records skipped");
            }
            save_stats(&stats, &out)?;
            println!("{} entries written to {}", stats.len(), out.display());
        }
        Command::Eval {
            pred,
            gt,
            t0,
            report,
            csv,
        } => {
            let r = evaluate_dirs(&pred, &gt, t0)?;
            if let Some(p) = &report {
                write_report_json(&r, p)?;
                info!("report written to {}", p.display());
            }
            if let Some(p) = &csv {
                write_report_csv(&r, p)?;
            }
            println!(
                "{} images, {} unmatched: IoU {:.4}, Dice/F2 {:.4}, accuracy {:.2}%",
                r.images.len(),
                r.unmatched.len(),
                r.mean.iou,
                r.mean.dice_f2,
                r.mean.accuracy_pct
            );
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
