use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphforge_core::mad::ColorSpace;
use morphforge_core::protocol::Split;
use morphforge_core::regen::FitOptions;
use morphforge_core::vuln::Aggregation;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "morphforge",
    version,
    about = "Face morph generation and evaluation pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build identity-disjoint train/test splits and morph pairs.
    Protocol(ProtocolArgs),
    /// Generate morphs for every protocol pair.
    Morph(MorphArgs),
    /// Score morphs against probes and report MMPMR/FMMPMR.
    Vuln(VulnArgs),
    /// Train a texture-based morph detector.
    MadTrain(MadTrainArgs),
    /// Evaluate detectors on every attack type (known and cross-set).
    MadEval(MadEvalArgs),
    /// Emit plot data (scatter/ROC CSVs plus axis metadata) from reports.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Protocol(_) => "protocol",
            Command::Morph(_) => "morph",
            Command::Vuln(_) => "vuln",
            Command::MadTrain(_) => "mad-train",
            Command::MadEval(_) => "mad-eval",
            Command::Report(_) => "report",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Protocol(a) => Some(a.seed),
            Command::Morph(a) => Some(a.seed),
            Command::Vuln(a) => Some(a.seed),
            Command::MadTrain(a) => Some(a.seed),
            Command::MadEval(a) => Some(a.seed),
            Command::Report(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    pub fn includes(self, split: Split) -> bool {
        match self {
            SplitArg::All => true,
            SplitArg::Train => split == Split::Train,
            SplitArg::Test => split == Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Toy,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Lma,
    Regen,
    LatentInterp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationArg {
    Max,
    Mean,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Max => Aggregation::Max,
            AggregationArg::Mean => Aggregation::Mean,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub pairs_per_identity: usize,
    /// Compare split sizes against a counts JSON, or `published` for the
    /// full-scale figures; writes `<out stem>.counts.json`.
    #[arg(long)]
    pub check_counts: Option<String>,
}

/// Overrides for the latent fit; unset fields keep the defaults.
#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl FitArgs {
    pub fn apply(&self, mut opts: FitOptions) -> FitOptions {
        if let Some(v) = self.lr {
            opts.learning_rate = v;
        }
        if let Some(v) = self.decay {
            opts.decay_rate = v;
        }
        if let Some(v) = self.threshold {
            opts.early_stop_threshold = v;
        }
        if let Some(v) = self.patience {
            opts.patience = v;
        }
        if let Some(v) = self.max_iter {
            opts.max_iterations = v;
        }
        opts
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Toy)]
    pub backend: BackendKind,
    /// Whitespace-separated command serving the external protocol; falls
    /// back to MORPHFORGE_BACKEND_CMD.
    #[arg(long)]
    pub backend_cmd: Option<String>,
    /// Square input side of the toy or external generator stack.
    #[arg(long, default_value_t = 64)]
    pub backend_size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MorphArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, default_value_t = morphforge_core::regen::LATENT_DIM)]
    pub latent_dim: usize,
    /// Trained toy weights; trained from the seed when absent.
    #[arg(long)]
    pub toy_model: Option<PathBuf>,
    #[arg(long, default_value_t = 150)]
    pub toy_steps: usize,
    /// Fine-tune the toy encoder on training-split bona fide images first.
    #[arg(long)]
    pub finetune: bool,
    /// Use the encoder latent as is, without per-image refinement.
    #[arg(long)]
    pub no_refine: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VulnArgs {
    /// Morph directories written by `morph` (one attack type each).
    #[arg(long, required = true, num_args = 1..)]
    pub morphs: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Grid side of the toy matcher.
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.001)]
    pub target_fmr: f64,
    #[arg(long, value_enum, default_value_t = AggregationArg::Max)]
    pub aggregation: AggregationArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct MadTrainArgs {
    #[arg(long)]
    pub morphs: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "rgb,ycbcr,hsv")]
    pub colors: Vec<ColorSpace>,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub radii: Vec<usize>,
    /// Keep morph source images among the bona fide samples.
    #[arg(long)]
    pub include_morph_sources: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct MadEvalArgs {
    /// `label=path` per trained detector.
    #[arg(long, required = true, num_args = 1..)]
    pub model: Vec<String>,
    #[arg(long, required = true, num_args = 1..)]
    pub morphs: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub include_morph_sources: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
