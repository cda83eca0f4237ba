use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::diagnostics::{gamma_sweep, oversmooth_trace};
use gsagcn_core::gnn::Activation;
use gsagcn_core::graph::normalize_adjacency;
use gsagcn_core::train::{train_node_classifier, TrainConfig};

use super::train::resolve_train_like;
use super::{CommonArgs, DataArgs, Outcome, TrainArgs};
use crate::config::{usage, Overrides};
use crate::dataset::{DatasetConfig, DatasetSource, ModelConfig, ModelKind};
use crate::manifest::OutputDir;

pub const SUMMARY_FILE: &str = "oversmooth_summary.csv";
pub const TRACE_FILE: &str = "dm_trace.csv";

#[derive(Args, Debug, Default)]
pub struct OversmoothCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated stack depths.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Seeds per depth, counted up from --seed; accuracies are averaged.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_parser = ["relu", "identity"])]
    pub activation: Option<String>,
    /// Interpolation weight used on every layer of the traced attentive stack.
    #[arg(long)]
    pub trace_gamma: Option<f64>,
    /// Comma-separated weights scanned for the final-layer reversal.
    #[arg(long, value_delimiter = ',')]
    pub sweep_gammas: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub attn_dim_divisor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OversmoothConfig {
    pub dataset: DatasetConfig,
    pub stack: StackConfig,
    pub train: TrainConfig,
    pub depths: Vec<usize>,
    pub seeds: usize,
    pub trace_gamma: f64,
    pub sweep_gammas: Vec<f64>,
}

impl OversmoothConfig {
    pub fn defaults(source: DatasetSource) -> Self {
        let m = ModelConfig::default();
        Self {
            dataset: DatasetConfig::defaults(source),
            stack: StackConfig {
                hidden: m.hidden,
                activation: m.activation,
                attn_dim_divisor: m.attn_dim_divisor,
            },
            train: TrainConfig::node_defaults(),
            depths: vec![2, 4, 8, 16, 32],
            seeds: 1,
            trace_gamma: 0.5,
            sweep_gammas: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
        }
    }

    fn model(&self, depth: usize) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::GsaGcn,
            hidden: self.stack.hidden,
            depth,
            activation: self.stack.activation,
            attn_dim_divisor: self.stack.attn_dim_divisor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.dataset.source.is_graph_level() {
            bail!(usage("oversmooth runs on node-classification datasets"));
        }
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        if self.depths.is_empty() || self.depths.contains(&0) || self.seeds == 0 {
            bail!(usage("need at least one positive depth and one seed"));
        }
        let ok = |g: f64| g.is_finite() && g >= 0.0;
        if !ok(self.trace_gamma) || !self.sweep_gammas.iter().copied().all(ok) {
            bail!(usage("trace and sweep gammas must be finite and non-negative"));
        }
        self.model(1).validate()
    }
}

impl OversmoothCmd {
    pub fn resolve(&self) -> Result<OversmoothConfig> {
        let mut o = Overrides::default();
        self.data.apply(&mut o);
        self.train.apply(&mut o);
        o.set("depths", self.depths.clone())
            .set("seeds", self.seeds)
            .set("stack.hidden", self.hidden)
            .set("stack.activation", self.activation.clone())
            .set("trace_gamma", self.trace_gamma)
            .set("sweep_gammas", self.sweep_gammas.clone());
        let cfg = resolve_train_like(&self.common, o, OversmoothConfig::defaults)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl super::Command for OversmoothConfig {
    const NAME: &'static str = "oversmooth";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let data = self.dataset.load()?;
        let fingerprint = data.fingerprint()?;
        let ds = data.into_node()?;
        let lc = ds.largest_component();
        if lc.n() < ds.n() {
            log::info!("tracing on the largest component: {} of {} nodes", lc.n(), ds.n());
        }
        let lc_na = normalize_adjacency(&lc.graph);

        let mut summary = String::from("depth,train_acc_gcn,train_acc_gsa\n");
        for &depth in &self.depths {
            let model = self.model(depth);
            let gsa_spec = model.spec_with(ds.num_features(), ds.num_classes, depth, true)?;
            let gcn_spec = gsa_spec.clone().with_attention(false);
            let (mut acc_gcn, mut acc_gsa) = (Vec::new(), Vec::new());
            let mut traced = None;
            for k in 0..self.seeds as u64 {
                let cfg = TrainConfig {
                    seed: self.train.seed + k,
                    ..self.train.clone()
                };
                acc_gcn.push(train_node_classifier(&gcn_spec, &ds, &cfg)?.final_metrics.train_acc);
                let gsa = train_node_classifier(&gsa_spec, &ds, &cfg)?;
                acc_gsa.push(gsa.final_metrics.train_acc);
                traced.get_or_insert(gsa.params);
            }
            let params = traced.expect("at least one seed");
            let report = oversmooth_trace(&gsa_spec, &params, &lc_na, &lc.x, depth, self.trace_gamma)?;
            let sweep = gamma_sweep(&gsa_spec, &params, &lc_na, &lc.x, depth, &self.sweep_gammas)?;
            let dir = format!("depth_{depth}");
            out.write(&format!("{dir}/{TRACE_FILE}"), report.to_csv())?;
            out.write_json(&format!("{dir}/trace.json"), &report)?;
            out.write_json(&format!("{dir}/gamma_sweep.json"), &sweep)?;
            let (g, a) = (mean(&acc_gcn), mean(&acc_gsa));
            summary.push_str(&format!("{depth},{g},{a}\n"));
            println!("depth={depth} train_acc_gcn={g:.4} train_acc_gsa={a:.4}");
        }
        out.write(SUMMARY_FILE, summary)?;
        Ok(Outcome::ok(self.train.seed, Some(fingerprint)))
    }
}
