//! Dataset and model sections shared by the training and diagnostic commands.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gsagcn_core::data::{
    gen_feature_sbm, gen_graph_classification, graph_dataset_files, load_planetoid_dir,
    make_full_split, make_semi_split, node_dataset_files, read_graph_dataset, read_node_dataset,
    GraphDataset, GraphSynthConfig, NodeDataset, SynthConfig,
};
use gsagcn_core::gnn::{Activation, ModelSpec, DEFAULT_ATTN_DIVISOR, DEFAULT_HIDDEN};

use crate::config::usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Cora,
    Citeseer,
    /// Feature stochastic block model generated in memory.
    Sbm,
    /// Synthetic graph-classification set generated in memory.
    Graphs,
    /// Node dataset in the export format.
    NodeDir,
    /// Graph dataset in the export format.
    GraphDir,
}

impl DatasetSource {
    pub fn is_graph_level(self) -> bool {
        matches!(self, Self::Graphs | Self::GraphDir)
    }

    fn planetoid_name(self) -> Option<&'static str> {
        match self {
            Self::Cora => Some("cora"),
            Self::Citeseer => Some("citeseer"),
            _ => None,
        }
    }
}

/// How train/validation/test masks are produced for node datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// `per_class` labelled nodes per class, then `val_size` and `test_size`.
    Semi,
    /// Stratified fractions.
    Full,
    /// Masks stored with or generated alongside the dataset.
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Directory holding the files; unused by the in-memory generators.
    pub path: Option<PathBuf>,
    pub task: Task,
    pub split_seed: u64,
    pub per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Scale each feature row to unit sum.
    pub row_normalize: bool,
    pub synth: Option<SynthConfig>,
    pub graph_synth: Option<GraphSynthConfig>,
}

impl DatasetConfig {
    pub fn defaults(source: DatasetSource) -> Self {
        let planetoid = source.planetoid_name();
        Self {
            source,
            path: planetoid.map(|name| PathBuf::from("data/planetoid").join(name)),
            task: if planetoid.is_some() { Task::Semi } else { Task::Given },
            split_seed: 0,
            per_class: 20,
            val_size: 500,
            test_size: 1000,
            train_frac: 0.6,
            val_frac: 0.2,
            row_normalize: planetoid.is_some(),
            synth: (source == DatasetSource::Sbm).then(SynthConfig::default),
            graph_synth: (source == DatasetSource::Graphs).then(GraphSynthConfig::default),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.source;
        if self.synth.is_some() && s != DatasetSource::Sbm {
            bail!(usage("dataset.synth applies only to the sbm source"));
        }
        if self.graph_synth.is_some() && s != DatasetSource::Graphs {
            bail!(usage("dataset.graph_synth applies only to the graphs source"));
        }
        if matches!(s, DatasetSource::NodeDir | DatasetSource::GraphDir) && self.path.is_none() {
            bail!(usage("this dataset source needs --data-dir"));
        }
        if s.planetoid_name().is_some() && self.task == Task::Given {
            bail!(usage("Planetoid files carry no masks; use --task semi or --task full"));
        }
        if s.is_graph_level() && self.task != Task::Given {
            bail!(usage("graph datasets keep their stored splits; use --task given"));
        }
        if let Some(c) = &self.synth {
            c.validate().map_err(|e| usage(e.to_string()))?;
        }
        if let Some(c) = &self.graph_synth {
            c.validate().map_err(|e| usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(&self) -> Result<Dataset> {
        let node = |ds: NodeDataset| -> Result<Dataset> {
            let ds = match self.task {
                Task::Given => ds,
                Task::Semi => {
                    let m = make_semi_split(
                        &ds.labels,
                        ds.num_classes,
                        self.per_class,
                        self.val_size,
                        self.test_size,
                        self.split_seed,
                    )?;
                    ds.with_masks(m)?
                }
                Task::Full => {
                    let m = make_full_split(&ds.labels, ds.num_classes, self.train_frac, self.val_frac, self.split_seed)?;
                    ds.with_masks(m)?
                }
            };
            Ok(Dataset::Node(if self.row_normalize { ds.row_normalized() } else { ds }))
        };
        match self.source {
            DatasetSource::Cora | DatasetSource::Citeseer => {
                let name = self.source.planetoid_name().expect("planetoid source");
                let dir = self.path.clone().expect("defaults set a path");
                let content = dir.join(format!("{name}.content"));
                if !content.is_file() {
                    bail!("dataset not found: {} does not exist", content.display());
                }
                let (ds, report) = load_planetoid_dir(&dir, name)
                    .with_context(|| format!("loading {name} from {}", dir.display()))?;
                log::info!(
                    "{name}: {} nodes, {} edges, {} classes ({} unknown citations skipped)",
                    ds.n(),
                    ds.graph.num_edges(),
                    ds.num_classes,
                    report.skipped_unknown
                );
                node(ds)
            }
            DatasetSource::Sbm => node(gen_feature_sbm(self.synth.as_ref().expect("validated"))?),
            DatasetSource::NodeDir => {
                let dir = self.path.as_ref().expect("validated");
                node(read_node_dataset(dir).with_context(|| format!("reading {}", dir.display()))?)
            }
            DatasetSource::Graphs => Ok(Dataset::Graph(gen_graph_classification(
                self.graph_synth.as_ref().expect("validated"),
            )?)),
            DatasetSource::GraphDir => {
                let dir = self.path.as_ref().expect("validated");
                Ok(Dataset::Graph(
                    read_graph_dataset(dir).with_context(|| format!("reading {}", dir.display()))?,
                ))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Dataset {
    Node(NodeDataset),
    Graph(GraphDataset),
}

impl Dataset {
    pub fn num_features(&self) -> usize {
        match self {
            Dataset::Node(d) => d.num_features(),
            Dataset::Graph(d) => d.num_features(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Dataset::Node(d) => d.num_classes,
            Dataset::Graph(d) => d.num_classes,
        }
    }

    pub fn into_node(self) -> Result<NodeDataset> {
        match self {
            Dataset::Node(d) => Ok(d),
            Dataset::Graph(_) => bail!(usage("this command needs a node-classification dataset")),
        }
    }

    /// SHA-256 over the export-format files of the dataset as used,
    /// masks and normalization included.
    pub fn fingerprint(&self) -> Result<String> {
        let files = match self {
            Dataset::Node(d) => node_dataset_files(d)?,
            Dataset::Graph(d) => graph_dataset_files(d)?,
        };
        let mut h = Sha256::new();
        for (name, text) in files {
            h.update(name.as_bytes());
            h.update([0]);
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
        }
        Ok(format!("{:x}", h.finalize()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gcn,
    GsaGcn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    /// Number of layers.
    pub depth: usize,
    pub activation: Activation,
    pub attn_dim_divisor: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::GsaGcn,
            hidden: DEFAULT_HIDDEN,
            depth: 2,
            activation: Activation::Relu,
            attn_dim_divisor: DEFAULT_ATTN_DIVISOR,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, d_in: usize, classes: usize) -> Result<ModelSpec> {
        self.spec_with(d_in, classes, self.depth, self.kind == ModelKind::GsaGcn)
    }

    pub fn spec_with(&self, d_in: usize, classes: usize, depth: usize, attention: bool) -> Result<ModelSpec> {
        let spec = ModelSpec {
            activation: self.activation,
            attn_dim_divisor: self.attn_dim_divisor,
            ..ModelSpec::stack(d_in, self.hidden, classes, depth, attention)
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.depth == 0 || self.attn_dim_divisor == 0 {
            bail!(usage("model hidden width, depth and attention divisor must be positive"));
        }
        Ok(())
    }
}
