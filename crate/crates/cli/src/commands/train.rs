use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::checkpoint;
use gsagcn_core::train::{train_graph_classifier, train_node_classifier, MetricsRecord, TrainConfig, TrainOutcome};

use super::{CommonArgs, DataArgs, ModelArgs, Outcome, TrainArgs};
use crate::config::{overlay, peek, resolve, usage, Overrides};
use crate::dataset::{Dataset, DatasetConfig, DatasetSource, ModelConfig};
use crate::manifest::OutputDir;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const PARAMS_FILE: &str = "params.bin";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Args, Debug, Default)]
pub struct TrainCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl TrainRunConfig {
    pub fn defaults(source: DatasetSource) -> Self {
        Self {
            dataset: DatasetConfig::defaults(source),
            model: ModelConfig::default(),
            train: if source.is_graph_level() {
                TrainConfig::graph_defaults()
            } else {
                TrainConfig::node_defaults()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate().map_err(|e| usage(e.to_string()))
    }
}

/// Resolves a config whose defaults depend on the dataset source.
pub fn resolve_train_like<T: Serialize + serde::de::DeserializeOwned>(
    common: &CommonArgs,
    flags: Overrides,
    defaults: impl FnOnce(DatasetSource) -> T,
) -> Result<T> {
    let over = overlay(common.config.as_deref(), flags)?;
    let source = peek(&over, "dataset.source")?.unwrap_or(DatasetSource::Cora);
    resolve(&defaults(source), over)
}

impl TrainCmd {
    pub fn resolve(&self) -> Result<TrainRunConfig> {
        let mut o = Overrides::default();
        self.data.apply(&mut o);
        self.model.apply(&mut o);
        self.train.apply(&mut o);
        let cfg = resolve_train_like(&self.common, o, TrainRunConfig::defaults)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    final_metrics: &'a MetricsRecord,
}

/// Trains the configured model on `data`.
pub fn fit(cfg: &TrainRunConfig, data: &Dataset) -> Result<TrainOutcome> {
    let spec = cfg.model.spec(data.num_features(), data.num_classes())?;
    Ok(match data {
        Dataset::Node(ds) => train_node_classifier(&spec, ds, &cfg.train)?,
        Dataset::Graph(ds) => train_graph_classifier(&spec, ds, &cfg.train)?,
    })
}

impl super::Command for TrainRunConfig {
    const NAME: &'static str = "train";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let data = self.dataset.load()?;
        let fingerprint = data.fingerprint()?;
        let result = fit(self, &data)?;
        out.write_jsonl(METRICS_FILE, &result.history)?;
        out.write(PARAMS_FILE, checkpoint::encode(&result.params))?;
        out.write_json(
            SUMMARY_FILE,
            &Summary {
                best_epoch: result.best_epoch,
                epochs_run: result.history.len(),
                stopped_early: result.stopped_early,
                final_metrics: &result.final_metrics,
            },
        )?;
        let m = &result.final_metrics;
        println!(
            "train_acc={:.4} val_acc={:.4} test_acc={:.4} best_epoch={}",
            m.train_acc, m.val_acc, m.test_acc, result.best_epoch
        );
        Ok(Outcome::ok(self.train.seed, Some(fingerprint)))
    }
}
