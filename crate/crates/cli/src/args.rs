use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "resynth", version, about = "Synthetic-lesion anomaly detection for retinal images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file (defaults apply to missing keys).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Single-threaded execution; artifacts are byte-reproducible for a fixed seed.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic lesions from a directory of normal images.
    Synth(SynthArgs),
    /// Stage 1: train the reconstruction network on normal images.
    TrainRecon(TrainReconArgs),
    /// Stage 2: train the localization network on synthetic lesions.
    TrainLoc(TrainLocArgs),
    /// Write anomaly heatmaps for images.
    Predict(PredictArgs),
    /// Score heatmaps against a dataset's masks or labels.
    Eval(EvalArgs),
    /// Copy an image/mask directory pair into the dataset layout.
    Ingest(IngestArgs),
    /// Run the toy end-to-end experiment.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub src_dir: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct TrainReconArgs {
    /// Dataset root (reads `train/normal/`).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Per-epoch report (JSON lines); defaults to the checkpoint path with `.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationFlag {
    /// Plain U-Net without reconstruction guidance.
    NoReconFeatures,
    /// Features from an untrained, randomly initialized reconstruction encoder.
    RandomReconFeatures,
    /// Concatenate the reconstructed image instead of encoder features.
    ImageConcat,
    /// Take lesion crops from procedural textures instead of normal images.
    TextureSource,
    /// Hard paste instead of distance-weighted blending.
    NoSelfMix,
    /// Whole-rectangle lesions instead of noise-shaped ones.
    NoPerlinMask,
}

#[derive(Debug, Args)]
pub struct TrainLocArgs {
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Stage-1 checkpoint; required unless the ablation needs no trained encoder.
    #[arg(long, value_name = "PATH")]
    pub recon_ckpt: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Ablation switches (repeatable, comma-separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ablation: Vec<AblationFlag>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub loc_ckpt: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub recon_ckpt: Option<PathBuf>,
    /// An image file or a directory of images.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Also render overlays of `probability >= T`.
    #[arg(long, value_name = "T")]
    pub overlay_threshold: Option<f64>,
    /// Ground-truth masks for the overlays (same file names as the inputs).
    #[arg(long, value_name = "DIR", requires = "overlay_threshold")]
    pub masks: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Pixel,
    Image,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset root (reads `test/images/`, `test/masks/`, `test/labels.csv`).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Heatmaps written by `predict`.
    #[arg(long, value_name = "DIR")]
    pub pred_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Pixel)]
    pub mode: EvalMode,
    /// Pixels averaged into an image score.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Where to write the report JSON (default: stdout only).
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Normal training images.
    #[arg(long, value_name = "DIR")]
    pub normals: Option<PathBuf>,
    /// Test images.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    /// Lesion masks for the test images, matched by file stem.
    #[arg(long, value_name = "DIR")]
    pub masks: Option<PathBuf>,
    /// `filename,label` rows for test images without a mask.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Dataset root to create.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Directory for the report, checkpoints and heatmaps.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Epochs per stage (default 200).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Skip the no-recon-features comparison run.
    #[arg(long)]
    pub no_ablation: bool,
}
