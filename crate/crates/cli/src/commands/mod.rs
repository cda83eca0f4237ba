pub mod decompose;
pub mod dropedge;
pub mod eval;
pub mod gen_synth;
pub mod lemmas;
pub mod oversmooth;
pub mod replay;
pub mod train;

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use crate::config::Overrides;
use crate::dataset::{DatasetSource, ModelKind, Task};
use crate::manifest::{resolve_out, OutputDir, RunManifest};

/// How a command's checks came out. Runtime errors are reported separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A checked property failed on an instance that met its assumptions.
    CheckFailed,
    /// The run sits on the boundary where the property holds with equality.
    Boundary,
}

pub struct Outcome {
    pub status: Status,
    pub seed: u64,
    pub dataset_fingerprint: Option<String>,
}

impl Outcome {
    pub fn ok(seed: u64, dataset_fingerprint: Option<String>) -> Self {
        Self {
            status: Status::Ok,
            seed,
            dataset_fingerprint,
        }
    }
}

/// A resolved, replayable command configuration.
pub trait Command: Serialize {
    const NAME: &'static str;
    fn execute(&self, out: &mut OutputDir) -> Result<Outcome>;
}

pub fn run<C: Command>(cfg: &C, out: &std::path::Path) -> Result<(Status, RunManifest)> {
    let mut dir = OutputDir::create(out)?;
    let outcome = cfg.execute(&mut dir)?;
    let manifest = dir.finish(C::NAME, cfg, outcome.seed, outcome.dataset_fingerprint)?;
    log::info!("{} wrote {} files to {}", C::NAME, manifest.outputs.len(), out.display());
    Ok((outcome.status, manifest))
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// TOML file with this command's settings; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory, relative to $GSAGCN_OUT_ROOT when that is set.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn out_dir(&self, default_name: &str) -> PathBuf {
        resolve_out(self.out.as_deref(), default_name)
    }
}

#[derive(Args, Debug, Default)]
pub struct DataArgs {
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetSource>,
    /// Directory of the dataset files.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    /// Seed of the split shuffle; 0 keeps node-id order.
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Feature noise of the sbm generator.
    #[arg(long)]
    pub feature_noise: Option<f64>,
    /// Extra cross-class edge probability of the sbm generator.
    #[arg(long)]
    pub edge_boost: Option<f64>,
}

impl DataArgs {
    pub fn apply(&self, o: &mut Overrides) {
        o.set("dataset.source", self.dataset)
            .set("dataset.path", self.data_dir.clone())
            .set("dataset.task", self.task)
            .set("dataset.split_seed", self.split_seed)
            .set("dataset.synth.feature_noise", self.feature_noise)
            .set("dataset.synth.cross_class_edge_boost", self.edge_boost);
    }
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Number of layers.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_parser = ["relu", "identity"])]
    pub activation: Option<String>,
}

impl ModelArgs {
    pub fn apply(&self, o: &mut Overrides) {
        o.set("model.kind", self.model)
            .set("model.hidden", self.hidden)
            .set("model.depth", self.depth)
            .set("model.activation", self.activation.clone());
    }
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, value_parser = ["first_layer", "all"])]
    pub decay_scope: Option<String>,
    /// Early-stopping patience on validation loss; 0 disables it.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Pin every attention interpolation weight to this value.
    #[arg(long)]
    pub gamma_freeze: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl TrainArgs {
    pub fn apply(&self, o: &mut Overrides) {
        o.set("train.seed", self.seed)
            .set("train.epochs", self.epochs)
            .set("train.learning_rate", self.lr)
            .set("train.weight_decay", self.weight_decay)
            .set("train.decay_scope", self.decay_scope.clone())
            .set("train.patience", self.patience)
            .set("train.dropout", self.dropout)
            .set("train.gamma_freeze", self.gamma_freeze)
            .set("train.batch_size", self.batch_size);
    }
}
