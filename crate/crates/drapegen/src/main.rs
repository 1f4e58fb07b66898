use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drapegen::metrics::SampleFilter;
use drapegen::pipeline::{
    audit_output, evaluate_predictions, generate, read_manifest, read_predictions, Encoder,
    GenerateConfig, JointSelection,
};

#[derive(Parser)]
#[command(
    name = "drapegen",
    version,
    about = "Augment motion-capture video with physically simulated blanket occlusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an occluded dataset from an input directory
    /// (<input>/model plus <input>/sequences/<id>).
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Flat key=value config file; explicit flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Cloth particles per side.
        #[arg(long = "grid-res")]
        grid_res: Option<usize>,
        /// Solver substeps per video frame.
        #[arg(long)]
        substeps: Option<usize>,
        /// Collision-projection iterations per substep.
        #[arg(long = "collision-iters")]
        collision_iters: Option<usize>,
        /// Distance-constraint iterations per substep.
        #[arg(long = "constraint-iters")]
        constraint_iters: Option<usize>,
        /// Collision margin in meters.
        #[arg(long)]
        margin: Option<f64>,
        /// Warm-up frames before the first output frame.
        #[arg(long)]
        warmup: Option<usize>,
        /// Minimum frames between consecutive segment starts.
        #[arg(long = "min-restart-gap")]
        min_restart_gap: Option<usize>,
        /// Blanket-to-body distance that stops a segment, meters.
        #[arg(long = "detach-threshold")]
        detach_threshold: Option<f64>,
        /// Frame encoder: png or jpeg.
        #[arg(long)]
        encoder: Option<Encoder>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write per-segment telemetry.tsv files.
        #[arg(long)]
        telemetry: bool,
    },
    /// Verify the manifest <-> file-tree bijection of a generated dataset.
    Audit {
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against a generated dataset's ground truth.
    Evaluate {
        /// Prediction container (directory or its predictions.json).
        #[arg(long)]
        pred: PathBuf,
        /// Split manifest to evaluate against.
        #[arg(long = "gt-manifest")]
        gt_manifest: PathBuf,
        /// Which subjects to score.
        #[arg(long, default_value = "occluded")]
        filter: FilterArg,
        /// Joint selection.
        #[arg(long, default_value = "all")]
        joints: JointsArg,
    },
}

#[derive(Clone, clap::ValueEnum)]
enum FilterArg {
    Occluded,
    All,
}

#[derive(Clone, clap::ValueEnum)]
enum JointsArg {
    All,
    Subset14,
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Generate {
            input,
            output,
            config,
            seed,
            grid_res,
            substeps,
            collision_iters,
            constraint_iters,
            margin,
            warmup,
            min_restart_gap,
            detach_threshold,
            encoder,
            jobs,
            telemetry,
        } => {
            let mut cfg = GenerateConfig::default();
            if let Some(path) = config {
                cfg.apply_file(&path)?;
            }
            macro_rules! merge {
                ($($field:ident),*) => {
                    $(if let Some(v) = $field { cfg.$field = v; })*
                };
            }
            merge!(
                seed,
                grid_res,
                substeps,
                collision_iters,
                constraint_iters,
                margin,
                warmup,
                min_restart_gap,
                encoder,
                jobs
            );
            if let Some(v) = detach_threshold {
                cfg.detach_threshold = v;
                cfg.scene.detach_threshold = v;
            }
            if telemetry {
                cfg.telemetry = true;
            }
            let summary = generate(&input, &output, &cfg)?;
            println!(
                "generated {} videos ({} frames) from {} sequences; {} detached, {} sim errors",
                summary.videos, summary.frames, summary.sequences, summary.detached,
                summary.sim_errors
            );
        }
        Command::Audit { output } => {
            let report = audit_output(&output)?;
            println!(
                "audit ok: {} splits, {} videos, {} frames in bijection with the manifests",
                report.splits, report.videos, report.frames
            );
        }
        Command::Evaluate { pred, gt_manifest, filter, joints } => {
            let preds = read_predictions(&pred)?;
            let manifest = read_manifest(&gt_manifest)?;
            let filter = match filter {
                FilterArg::Occluded => SampleFilter::OccludedOnly,
                FilterArg::All => SampleFilter::All,
            };
            let selection = match joints {
                JointsArg::All => JointSelection::All,
                JointsArg::Subset14 => JointSelection::Subset14,
            };
            let report = evaluate_predictions(&preds, &manifest, filter, selection)?;
            println!("PA-MPJPE: {:.2} mm", report.pa_mpjpe_mm);
            println!("MPJPE: {:.2} mm", report.mpjpe_mm);
            println!("samples: {}", report.samples);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
