use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cropgan_core::synth::Preset;

/// Cross-domain crop mapping: synthetic benchmarks, preprocessing, crop
/// classifiers and cycle-consistent domain mapping.
///
/// Every command writes its outputs plus `run_manifest.txt` into `--out-dir`;
/// `cropgan replay` re-runs a manifest and checks the outputs hash the same.
#[derive(Debug, Parser)]
#[command(name = "cropgan", version, propagate_version = true)]
pub struct Cli {
    /// File of `key = value` lines used as defaults for the command's flags;
    /// flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic source and target domains.
    Synth(SynthArgs),
    /// Composite, gap-fill and extract samples from a scene directory.
    Preprocess(PreprocessArgs),
    /// Train the crop mapper on a labeled dataset.
    TrainClassifier(TrainClassifierArgs),
    /// Train the cycle-consistent generators between target and source.
    TrainGan(TrainGanArgs),
    /// Map a target dataset into the source domain with generator G.
    Adapt(AdaptArgs),
    /// Classify every sample of a dataset.
    Predict(PredictArgs),
    /// Score baseline and adapted predictions against the truth.
    Evaluate(EvaluateArgs),
    /// Embed one or more datasets in the plane with t-SNE.
    Tsne(TsneArgs),
    /// Draw predictions (and errors, if the scene has truth) as PPM images.
    Render(RenderArgs),
    /// Run the synthetic adaptation benchmark for several seeds, one after another.
    Batch(BatchArgs),
    /// Re-run a command from its run manifest and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    CrossYear,
    ChinaLike,
    CanadaLike,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::CrossYear => Preset::CrossYear,
            PresetArg::ChinaLike => Preset::ChinaLike,
            PresetArg::CanadaLike => Preset::CanadaLike,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// `source.cgts` and `target.cgts` sample files.
    Dataset,
    /// `source/` and `target/` scene directories.
    Scene,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Features {
    /// The 54 reflectance values of each sample.
    Raw,
    /// The crop mapper's FC 1 activations.
    Classifier,
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Directory receiving the outputs and the run manifest.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "dataset")]
    pub kind: SynthKind,
    /// Shift applied to the target domain.
    #[arg(long, value_enum, default_value = "canada-like")]
    pub preset: PresetArg,
    /// Samples per class in each domain (datasets only).
    #[arg(long, default_value_t = 1000)]
    pub n_per_class: usize,
    /// Scene width in pixels.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Scene height in pixels.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Side of the square fields; must divide width and height.
    #[arg(long, default_value_t = 8)]
    pub field_size: usize,
    /// Probability that an acquisition of a pixel is cloudy.
    #[arg(long, default_value_t = 0.0)]
    pub cloud_prob: f64,
    /// Source uses `2·seed`, target `2·seed + 1`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    /// Scene directory.
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainClassifierArgs {
    /// Labeled source-domain dataset.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.70)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainGanArgs {
    /// Source-domain dataset (labels ignored).
    #[arg(long, value_name = "FILE")]
    pub source: PathBuf,
    /// Target-domain dataset (labels ignored).
    #[arg(long, value_name = "FILE")]
    pub target: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Weight of the adversarial terms.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Weight of the cycle-consistency terms.
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    /// Weight of the identity terms.
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    /// Epochs excluded from model selection.
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    /// Keep the networks of every N-th epoch under `epochs/` (0 keeps none).
    #[arg(long, default_value_t = 1)]
    pub checkpoint_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct AdaptArgs {
    /// Target → source generator checkpoint.
    #[arg(long, value_name = "FILE")]
    pub generator: PathBuf,
    /// Target-domain dataset.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    /// Crop-mapper checkpoint.
    #[arg(long, value_name = "FILE")]
    pub classifier: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    /// Reference labels: a labeled dataset or a predictions CSV.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Predictions of the classifier applied directly.
    #[arg(long, value_name = "FILE")]
    pub baseline: PathBuf,
    /// Predictions on the adapted data.
    #[arg(long, value_name = "FILE")]
    pub adapted: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TsneArgs {
    /// Datasets to embed, comma-separated; the domain column is each file's stem.
    #[arg(long, value_name = "FILE", value_delimiter = ',', required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "raw")]
    pub features: Features,
    /// Crop-mapper checkpoint, required with `--features classifier`.
    #[arg(long, value_name = "FILE")]
    pub classifier: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Points beyond this many are subsampled (at most 5000).
    #[arg(long, default_value_t = 5000)]
    pub max_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RenderArgs {
    /// Predictions CSV.
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    /// Dataset the predictions were made on; supplies pixel coordinates.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Scene the dataset came from; supplies the size and the truth raster.
    #[arg(long, value_name = "DIR")]
    pub scene: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BatchArgs {
    #[arg(long, value_enum, default_value = "canada-like")]
    pub preset: PresetArg,
    /// Seeds to run, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    #[arg(long, default_value_t = 100)]
    pub classifier_epochs: usize,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReplayArgs {
    /// Run manifest written by an earlier command.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}
