use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rrl", version, about = "Rule-based representation learner: train, cross-validate, evaluate, explain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model on a 95/5 train/validation split of the data.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Score a saved model on a data file.
    Eval(EvalArgs),
    /// Extract the rule set of a saved model.
    Explain(ExplainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema sidecar describing every column.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LafChoice {
    Orig,
    Logexp,
    Nlaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetChoice {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraftingChoice {
    Single,
    Hier,
    Ste,
}

/// Hyperparameters. Anything left unset takes the tuned default for the
/// dataset (recognized by the data file name), or the library default.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Logical layer widths, e.g. `64,64`. Each layer has this many
    /// conjunction and as many disjunction nodes.
    #[arg(long, value_parser = parse_widths)]
    pub layers: Option<Widths>,
    /// Disable skip connections between logical layers.
    #[arg(long)]
    pub no_skip: bool,
    /// Let the linear head also read the second-to-last logical layer.
    #[arg(long)]
    pub head_skip: bool,
    #[arg(long, value_enum)]
    pub laf: Option<LafChoice>,
    /// (α, β, γ): a = (0.999, 8, 1), b = (0.999, 8, 3), c = (0.9, 3, 3).
    #[arg(long, value_enum)]
    pub nlaf_preset: Option<PresetChoice>,
    #[arg(long, value_enum)]
    pub grafting: Option<GraftingChoice>,
    /// Number of lower (and of upper) bounds per continuous feature.
    #[arg(long)]
    pub bounds_k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Multiplicative learning-rate decay factor.
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    /// L2 coefficient on the logical-layer weights.
    #[arg(long)]
    pub l2: Option<f64>,
    /// Initial softmax temperature.
    #[arg(long)]
    pub temp_init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Widths(pub Vec<usize>);

fn parse_widths(s: &str) -> Result<Widths, String> {
    let widths = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if widths.contains(&0) {
        return Err("layer widths must be positive".into());
    }
    Ok(Widths(widths))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving the loss history and validation report.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Where to write the model file [default: <out-dir>/model.json].
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Directory receiving the cross-validation report.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Schema of the data; must match the model's. Defaults to the schema
    /// stored in the model file.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Also write the report to `<out-dir>/eval_report.txt`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory receiving the rule document, its JSON form and the weight
    /// distribution.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Optional data on which to confirm that rules and model agree.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,
}
