use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use gsagcn_core::diagnostics::{dropedge_simulation, exhaustive_sign_sweep, DropEdgeSimReport, SignSource, SignSweep};
use gsagcn_core::Error as CoreError;

use super::{CommonArgs, Outcome, Status};
use crate::config::{overlay, resolve, usage, Overrides};
use crate::manifest::OutputDir;

#[derive(Args, Debug, Default)]
pub struct DropEdgeCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Comma-separated degrees.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    /// Comma-separated clique orders minus one (1 or 2).
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also sweep every sign assignment for n ≤ 7.
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropEdgeConfig {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub r: Vec<usize>,
    pub seed: u64,
    pub exhaustive: bool,
}

impl Default for DropEdgeConfig {
    fn default() -> Self {
        Self {
            n: vec![4, 6, 8, 10, 12],
            d: vec![2, 3],
            r: vec![1, 2],
            seed: 0,
            exhaustive: false,
        }
    }
}

impl DropEdgeCmd {
    pub fn resolve(&self) -> Result<DropEdgeConfig> {
        let mut o = Overrides::default();
        o.set("n", self.n.clone())
            .set("d", self.d.clone())
            .set("r", self.r.clone())
            .set("seed", self.seed)
            .set("exhaustive", self.exhaustive.then_some(true));
        let cfg: DropEdgeConfig = resolve(&DropEdgeConfig::default(), overlay(self.common.config.as_deref(), o)?)?;
        if cfg.n.is_empty() || cfg.d.is_empty() || cfg.r.is_empty() {
            bail!(usage("the n, d and r lists must not be empty"));
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Row {
    n: usize,
    d: usize,
    r: usize,
    status: &'static str,
    report: Option<DropEdgeSimReport>,
    error: Option<String>,
}

impl super::Command for DropEdgeConfig {
    const NAME: &'static str = "dropedge-sim";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let mut rows = Vec::new();
        let mut csv = String::from("n,d,r,eliminated,guaranteed,status\n");
        let mut sweeps: Vec<(usize, SignSweep)> = Vec::new();
        let mut failed = false;
        for &n in &self.n {
            for &d in &self.d {
                for &r in &self.r {
                    let row = match dropedge_simulation(n, d, r, &SignSource::Seed(self.seed)) {
                        Ok(rep) => {
                            let ok = rep.eliminated_count >= rep.guaranteed_count;
                            failed |= !ok;
                            csv.push_str(&format!(
                                "{n},{d},{r},{},{},{}\n",
                                rep.eliminated_count,
                                rep.guaranteed_count,
                                if ok { "ok" } else { "below_guarantee" }
                            ));
                            Row { n, d, r, status: if ok { "ok" } else { "below_guarantee" }, report: Some(rep), error: None }
                        }
                        Err(CoreError::Param(msg)) => {
                            log::warn!("n={n} d={d} r={r}: {msg}");
                            csv.push_str(&format!("{n},{d},{r},,,invalid\n"));
                            Row { n, d, r, status: "invalid", report: None, error: Some(msg) }
                        }
                        Err(e) => return Err(e.into()),
                    };
                    rows.push(row);
                    if self.exhaustive && (2..=7).contains(&n) {
                        match exhaustive_sign_sweep(n, d, r, self.seed) {
                            Ok(s) => {
                                failed |= s.min_eliminated < s.guaranteed_count;
                                sweeps.push((d, s));
                            }
                            Err(CoreError::Param(_)) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
        print!("{csv}");
        out.write("dropedge.csv", &csv)?;
        out.write_json("dropedge.json", &rows)?;
        if self.exhaustive {
            let mut text = String::from("n,d,r,assignments,with_clique,min_eliminated,guaranteed\n");
            for (d, s) in &sweeps {
                text.push_str(&format!(
                    "{},{d},{},{},{},{},{}\n",
                    s.n, s.r, s.assignments, s.with_clique, s.min_eliminated, s.guaranteed_count
                ));
            }
            out.write("exhaustive.csv", text)?;
        }
        Ok(Outcome {
            status: if failed { Status::CheckFailed } else { Status::Ok },
            seed: self.seed,
            dataset_fingerprint: None,
        })
    }
}
