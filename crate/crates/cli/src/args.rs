use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "driftclust",
    version,
    about = "Mini-batch k-means with a jointly trained feature head"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a dataset and write labels and metrics.
    Cluster(ClusterArgs),
    /// NMI between a ground-truth and a predicted label file.
    Eval(EvalArgs),
    /// Run a grid of km x epochs x seed and emit one CSV row per cell.
    Sweep(SweepArgs),
}

/// Settings shared by `cluster` and `sweep`. Every one of them may also be
/// given in the `--config` file under the key shown in brackets.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset source: mnist, blobs or csv [data].
    #[arg(long)]
    pub data: Option<String>,
    /// IDX image file [images].
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// IDX label file [labels].
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// CSV feature table [csv].
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Keep only the first N samples [limit].
    #[arg(long)]
    pub limit: Option<usize>,

    /// Number of clusters [k].
    #[arg(long)]
    pub k: Option<usize>,
    /// Mini-batch size [nm].
    #[arg(long)]
    pub nm: Option<usize>,
    /// Samples per mini-batch used for fine-tuning [km].
    #[arg(long)]
    pub km: Option<usize>,
    /// Head learning rate [eta].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Passes over the data [epochs].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Cap on mini-batch iterations, 0 for none [max_iters].
    #[arg(long)]
    pub max_iters: Option<u64>,
    /// full, baseline1, baseline2 or baseline3 [mode].
    #[arg(long)]
    pub mode: Option<String>,
    /// Run seed [seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Width of the head's hidden layer [hidden_dim].
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// last-step or full-pass [rollback].
    #[arg(long)]
    pub rollback: Option<String>,
    /// Features clustered by baseline3: backbone or head [baseline3_features].
    #[arg(long)]
    pub baseline3_features: Option<String>,

    /// flatten, randproj or tinyconv [backbone].
    #[arg(long)]
    pub backbone: Option<String>,
    /// Output size of randproj [backbone_dim].
    #[arg(long)]
    pub backbone_dim: Option<usize>,
    /// Weight seed for randproj and tinyconv [backbone_seed].
    #[arg(long)]
    pub backbone_seed: Option<u64>,

    /// Blob clusters [blob_clusters].
    #[arg(long)]
    pub blob_clusters: Option<usize>,
    /// Points per blob [blob_points].
    #[arg(long)]
    pub blob_points: Option<usize>,
    /// Blob dimension [blob_dim].
    #[arg(long)]
    pub blob_dim: Option<usize>,
    /// Distance of blob centers from the origin [blob_separation].
    #[arg(long)]
    pub blob_separation: Option<f64>,
    /// Per-coordinate blob noise [blob_sigma].
    #[arg(long)]
    pub blob_sigma: Option<f64>,
    /// Seed for blob generation; defaults to the run seed [data_seed].
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Label file, one `index,label` line per sample [out_labels].
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
    /// Metrics file [out_metrics].
    #[arg(long)]
    pub out_metrics: Option<PathBuf>,
    /// Checkpoint written after every epoch [checkpoint].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint [resume].
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs in this process, leaving only the
    /// checkpoint behind.
    #[arg(long, requires = "checkpoint")]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth label file.
    pub truth: PathBuf,
    /// Predicted label file.
    pub pred: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated km values; defaults to the single configured km.
    #[arg(long, value_delimiter = ',')]
    pub km_values: Vec<usize>,
    /// Comma-separated epoch counts.
    #[arg(long, value_delimiter = ',')]
    pub epoch_values: Vec<usize>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run cells on a thread pool.
    #[arg(long)]
    pub parallel: bool,
}
