//! `groupcam`: saliency maps, evaluations and the fine-tuning demo from the command line.

mod config;
mod evaluate;
mod explain;
mod finetune;
mod io;
mod make_fixtures;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groupcam::evaluation::RandomizationMode;
use groupcam::saliency::Method;
use groupcam::GroupCamConfig;

#[derive(Parser)]
#[command(name = "groupcam", version, about = "Group-CAM saliency maps and their evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and train the fixture classifier.
    MakeFixtures(FixturesArgs),
    /// Explain one image: saliency grid, grayscale PNG and overlay PNG.
    Explain(ExplainArgs),
    /// Deletion/insertion AUC, pointing game and sanity check over a dataset.
    Evaluate(EvaluateArgs),
    /// Paired saliency-augmented and plain fine-tuning runs.
    Finetune(FinetuneArgs),
}

/// Saliency options shared by `explain` and `evaluate`.
#[derive(Args, Clone, Debug, Default)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub groups: Option<usize>,
    /// De-noising percentile.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Blur kernel size for the baseline image.
    #[arg(long)]
    pub ksize: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Target layer id (defaults to the last convolutional layer).
    #[arg(long)]
    pub layer: Option<String>,
    /// Skip the de-noising step.
    #[arg(long)]
    pub no_denoise: bool,
}

impl SaliencyArgs {
    pub fn apply(&self, cfg: &mut GroupCamConfig) {
        if let Some(g) = self.groups {
            cfg.groups = g;
        }
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
        if let Some(k) = self.ksize {
            cfg.ksize = k;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if let Some(l) = &self.layer {
            cfg.layer_id = Some(l.clone());
        }
        if self.no_denoise {
            cfg.denoise = false;
        }
    }
}

#[derive(Args, Debug)]
pub struct FixturesArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of training images to generate.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Class to explain; defaults to the predicted class.
    #[arg(long = "class")]
    pub class: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    #[command(flatten)]
    pub saliency: SaliencyArgs,
    /// Overlay opacity of the colormap.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the per-group confidence gains.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory with `index.json` and `images/`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    /// Comma-separated subset of auc, pointing, sanity.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<config::Metric>>,
    #[command(flatten)]
    pub saliency: SaliencyArgs,
    #[arg(long)]
    pub step_fraction: Option<f64>,
    /// Randomization mode of the sanity check.
    #[arg(long, value_parser = parse_mode)]
    pub randomization: Option<RandomizationMode>,
    /// Worker threads, each with its own model copy.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training dataset directory; held-out images are read from its `heldout/` subdirectory.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Groups used for the augmentation masks.
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub ksize: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Write mask overlays of a few training images after every epoch.
    #[arg(long)]
    pub render_epochs: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub verbose: bool,
}

fn parse_mode(s: &str) -> Result<RandomizationMode, String> {
    s.parse().map_err(|e: groupcam::Error| e.to_string())
}

/// Runs `f` on a thread pool of `jobs` workers.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeFixtures(a) => make_fixtures::run(&a),
        Command::Explain(a) => explain::run(&a),
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Finetune(a) => finetune::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
