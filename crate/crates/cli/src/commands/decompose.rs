use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::diagnostics::{decompose_model_loss, DecompositionOptions, LossDecomposition, MatrixSummary};
use gsagcn_core::gnn::{init_params, GsaLayerParams};
use gsagcn_core::graph::normalize_adjacency;

use super::eval::CheckpointSource;
use super::Outcome;
use crate::config::{overlay, resolve, usage, Overrides};
use crate::manifest::{resolve_out, OutputDir};

pub const DECOMPOSITION_FILE: &str = "decomposition.json";

#[derive(Args, Debug)]
pub struct DecomposeCmd {
    /// TOML file with `gamma`, `compare_init` and `[options]`.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory of a `train` run.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Interpolation weight of the decomposition; defaults to the
    /// checkpoint's last-layer value (0 for a plain last layer).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = ["cross", "self_norm"])]
    pub similarity: Option<String>,
    #[arg(long, value_parser = ["include", "exclude"])]
    pub complement_diagonal: Option<String>,
    /// Skip the comparison with the run's initial parameters.
    #[arg(long)]
    pub no_compare_init: bool,
    /// Defaults to `<run>/decompose`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub source: CheckpointSource,
    pub gamma: Option<f64>,
    pub options: DecompositionOptions,
    /// Also decompose the seeded initial parameters at the same `gamma`.
    pub compare_init: bool,
}

impl DecomposeCmd {
    pub fn resolve(&self) -> Result<DecomposeConfig> {
        let defaults = DecomposeConfig {
            source: CheckpointSource::from_run(&self.run, self.checkpoint.as_deref())?,
            gamma: None,
            options: DecompositionOptions::default(),
            compare_init: true,
        };
        let mut o = Overrides::default();
        o.set("gamma", self.gamma)
            .set("options.similarity", self.similarity.clone())
            .set("options.complement_diagonal", self.complement_diagonal.clone())
            .set("compare_init", self.no_compare_init.then_some(false));
        let cfg: DecomposeConfig = resolve(&defaults, overlay(self.config.as_deref(), o)?)?;
        if let Some(g) = cfg.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                bail!(usage(format!("gamma must be finite and non-negative, got {g}")));
            }
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(p) => resolve_out(Some(p), "decompose"),
            None => self.run.join("decompose"),
        }
    }
}

#[derive(Serialize)]
struct Entry {
    decomposition: LossDecomposition,
    geometry: MatrixSummary,
}

#[derive(Serialize)]
struct Report {
    gamma: f64,
    checkpoint: Entry,
    initial: Option<Entry>,
    feature_reg_decreased: Option<bool>,
}

impl super::Command for DecomposeConfig {
    const NAME: &'static str = "decompose-loss";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let cfg = &self.source.trained_with;
        let (data, params) = self.source.load()?;
        let fingerprint = data.fingerprint()?;
        let ds = data.into_node()?;
        let spec = cfg.model.spec(ds.num_features(), ds.num_classes)?;
        let na = normalize_adjacency(&ds.graph);
        let last_attentive = *spec.attention.last().unwrap_or(&false);
        let gamma = self.gamma.unwrap_or_else(|| match params.last() {
            Some(p) if last_attentive => p.gamma,
            _ => 0.0,
        });
        let entry = |p: &[GsaLayerParams]| -> Result<Entry> {
            let decomposition = decompose_model_loss(&spec, p, &na, &ds.graph, &ds.x, Some(gamma), self.options)?;
            let geometry = decomposition.summary(&na);
            Ok(Entry { decomposition, geometry })
        };
        let checkpoint = entry(&params)?;
        let initial = if self.compare_init {
            let mut init = init_params(&spec, cfg.train.seed)?;
            if let Some(g) = cfg.train.gamma_freeze {
                init.iter_mut().for_each(|p| p.gamma = g);
            }
            Some(entry(&init)?)
        } else {
            None
        };
        let decreased = initial
            .as_ref()
            .map(|i| checkpoint.decomposition.feature_reg < i.decomposition.feature_reg);
        println!(
            "gamma={gamma} feature_reg={} feature_reg_raw={}{}",
            checkpoint.decomposition.feature_reg,
            checkpoint.decomposition.feature_reg_raw,
            initial
                .as_ref()
                .map(|i| format!(" initial_feature_reg={}", i.decomposition.feature_reg))
                .unwrap_or_default()
        );
        out.write_json(
            DECOMPOSITION_FILE,
            &Report {
                gamma,
                checkpoint,
                initial,
                feature_reg_decreased: decreased,
            },
        )?;
        Ok(Outcome::ok(cfg.train.seed, Some(fingerprint)))
    }
}
