use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::checkpoint;
use gsagcn_core::gnn::GsaLayerParams;
use gsagcn_core::train::{evaluate_graph_classifier, evaluate_node_classifier};

use super::train::{TrainRunConfig, PARAMS_FILE};
use super::Outcome;
use crate::config::usage;
use crate::dataset::Dataset;
use crate::manifest::{resolve_out, OutputDir, RunManifest, MANIFEST_FILE};

pub const EVAL_FILE: &str = "eval.json";

#[derive(Args, Debug)]
pub struct EvalCmd {
    /// Output directory of a `train` run.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Checkpoint to evaluate instead of the run's own `params.bin`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Defaults to `<run>/eval`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// A checkpoint plus the training configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSource {
    pub checkpoint: PathBuf,
    pub trained_with: TrainRunConfig,
}

impl CheckpointSource {
    pub fn from_run(run: &Path, checkpoint: Option<&Path>) -> Result<Self> {
        let manifest = RunManifest::load(&run.join(MANIFEST_FILE)).map_err(|e| usage(format!("{e:#}")))?;
        if manifest.command != "train" {
            bail!(usage(format!(
                "{} holds a `{}` run, not a `train` run",
                run.display(),
                manifest.command
            )));
        }
        let trained_with: TrainRunConfig = serde_json::from_value(manifest.config)
            .map_err(|e| usage(format!("manifest config does not parse: {e}")))?;
        Ok(Self {
            checkpoint: checkpoint.map_or_else(|| run.join(PARAMS_FILE), Path::to_path_buf),
            trained_with,
        })
    }

    pub fn load(&self) -> Result<(Dataset, Vec<GsaLayerParams>)> {
        let data = self.trained_with.dataset.load()?;
        let params = checkpoint::load(&self.checkpoint)
            .with_context(|| format!("loading {}", self.checkpoint.display()))?;
        Ok((data, params))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub source: CheckpointSource,
}

impl EvalCmd {
    pub fn resolve(&self) -> Result<EvalConfig> {
        Ok(EvalConfig {
            source: CheckpointSource::from_run(&self.run, self.checkpoint.as_deref())?,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(p) => resolve_out(Some(p), "eval"),
            None => self.run.join("eval"),
        }
    }
}

impl super::Command for EvalConfig {
    const NAME: &'static str = "eval";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let cfg = &self.source.trained_with;
        let (data, params) = self.source.load()?;
        let spec = cfg.model.spec(data.num_features(), data.num_classes())?;
        let metrics = match &data {
            Dataset::Node(ds) => evaluate_node_classifier(&spec, &params, ds)?,
            Dataset::Graph(ds) => evaluate_graph_classifier(&spec, &params, ds, cfg.train.batch_size)?,
        };
        out.write_json(EVAL_FILE, &metrics)?;
        println!("{}", serde_json::to_string(&metrics)?);
        Ok(Outcome::ok(cfg.train.seed, Some(data.fingerprint()?)))
    }
}
