use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::diagnostics::{run_lemma_suite, LemmaSuiteConfig};

use super::{CommonArgs, Outcome, Status};
use crate::config::{overlay, resolve, usage, Overrides};
use crate::manifest::OutputDir;

#[derive(Args, Debug, Default)]
pub struct LemmasCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_instances: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Shift of the regularized Laplacian.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_nodes: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub edge_prob: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmasConfig {
    pub suite: LemmaSuiteConfig,
}

impl LemmasCmd {
    pub fn resolve(&self) -> Result<LemmasConfig> {
        let mut o = Overrides::default();
        o.set("suite.n_instances", self.n_instances)
            .set("suite.gamma", self.gamma)
            .set("suite.eps", self.eps)
            .set("suite.seed", self.seed)
            .set("suite.min_nodes", self.min_nodes)
            .set("suite.max_nodes", self.max_nodes)
            .set("suite.edge_prob", self.edge_prob);
        let defaults = LemmasConfig {
            suite: LemmaSuiteConfig::default(),
        };
        let cfg: LemmasConfig = resolve(&defaults, overlay(self.common.config.as_deref(), o)?)?;
        cfg.suite.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Summary {
    evaluated: usize,
    skipped: usize,
    pd_pass: usize,
    amp_pass: usize,
    sandwich_pass: usize,
    boundary: bool,
}

impl super::Command for LemmasConfig {
    const NAME: &'static str = "lemmas";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let report = run_lemma_suite(&self.suite)?;
        for inst in &report.instances {
            println!("{}", serde_json::to_string(inst)?);
        }
        out.write_jsonl("lemmas.jsonl", &report.instances)?;
        let n = report.evaluated();
        out.write_json(
            "summary.json",
            &Summary {
                evaluated: n,
                skipped: report.skipped.len(),
                pd_pass: report.pd_pass,
                amp_pass: report.amp_pass,
                sandwich_pass: report.sandwich_pass,
                boundary: report.boundary(),
            },
        )?;
        println!("pd_pass={}/{n} amp_pass={}/{n}", report.pd_pass, report.amp_pass);
        let status = if report.boundary() {
            eprintln!("gamma = 0: the operator is the identity and s_tilde = s (boundary case)");
            Status::Boundary
        } else if report.all_pass() {
            Status::Ok
        } else {
            Status::CheckFailed
        };
        Ok(Outcome {
            status,
            seed: self.suite.seed,
            dataset_fingerprint: None,
        })
    }
}
