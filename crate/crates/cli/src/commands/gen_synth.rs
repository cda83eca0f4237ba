use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use gsagcn_core::data::{
    gen_feature_sbm, gen_graph_classification, graph_dataset_files, node_dataset_files, GraphSynthConfig,
    SynthConfig,
};

use super::{CommonArgs, Outcome};
use crate::config::{merge, overlay, peek, resolve, usage, Overrides};
use crate::dataset::Dataset;
use crate::manifest::OutputDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Sbm,
    Graphs,
}

#[derive(Args, Debug, Default)]
pub struct GenSynthCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Node count (sbm).
    #[arg(long)]
    pub n: Option<usize>,
    /// Class count (sbm).
    #[arg(long)]
    pub classes: Option<usize>,
    /// Feature noise scale.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Extra cross-class edge probability (sbm).
    #[arg(long)]
    pub edge_boost: Option<f64>,
    #[arg(long)]
    pub graphs_per_class: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSynthConfig {
    pub kind: SynthKind,
    pub synth: Option<SynthConfig>,
    pub graph_synth: Option<GraphSynthConfig>,
}

impl GenSynthConfig {
    pub fn defaults(kind: SynthKind) -> Self {
        Self {
            kind,
            synth: (kind == SynthKind::Sbm).then(SynthConfig::default),
            graph_synth: (kind == SynthKind::Graphs).then(GraphSynthConfig::default),
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        Ok(match (&self.synth, &self.graph_synth) {
            (Some(c), None) => Dataset::Node(gen_feature_sbm(c)?),
            (None, Some(c)) => Dataset::Graph(gen_graph_classification(c)?),
            _ => bail!(usage("configure exactly one of synth or graph_synth, matching kind")),
        })
    }
}

impl GenSynthCmd {
    pub fn resolve(&self) -> Result<GenSynthConfig> {
        let mut k = Overrides::default();
        k.set("kind", self.kind);
        let mut over = overlay(self.common.config.as_deref(), k)?;
        let kind = peek(&over, "kind")?.unwrap_or(SynthKind::Sbm);
        let mut o = Overrides::default();
        match kind {
            SynthKind::Sbm => {
                o.set("synth.seed", self.seed)
                    .set("synth.n", self.n)
                    .set("synth.num_classes", self.classes)
                    .set("synth.feature_noise", self.noise)
                    .set("synth.cross_class_edge_boost", self.edge_boost);
                if self.graphs_per_class.is_some() {
                    bail!(usage("--graphs-per-class applies to --kind graphs"));
                }
            }
            SynthKind::Graphs => {
                o.set("graph_synth.seed", self.seed)
                    .set("graph_synth.noise", self.noise)
                    .set("graph_synth.graphs_per_class", self.graphs_per_class);
                if self.n.is_some() || self.classes.is_some() || self.edge_boost.is_some() {
                    bail!(usage("--n, --classes and --edge-boost apply to --kind sbm"));
                }
            }
        }
        merge(&mut over, o.into_value());
        let cfg: GenSynthConfig = resolve(&GenSynthConfig::defaults(kind), over)?;
        match (cfg.kind, &cfg.synth, &cfg.graph_synth) {
            (SynthKind::Sbm, Some(c), None) => c.validate(),
            (SynthKind::Graphs, None, Some(c)) => c.validate(),
            _ => bail!(usage("the synth section must match kind")),
        }
        .map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

impl super::Command for GenSynthConfig {
    const NAME: &'static str = "gen-synth";

    fn execute(&self, out: &mut OutputDir) -> Result<Outcome> {
        let data = self.generate()?;
        let files = match &data {
            Dataset::Node(d) => node_dataset_files(d)?,
            Dataset::Graph(d) => graph_dataset_files(d)?,
        };
        for (name, text) in &files {
            out.write(name, text)?;
        }
        let seed = match (&self.synth, &self.graph_synth) {
            (Some(c), _) => c.seed,
            (_, Some(c)) => c.seed,
            _ => 0,
        };
        println!("wrote {} files to {}", files.len(), out.path().display());
        Ok(Outcome::ok(seed, Some(data.fingerprint()?)))
    }
}
