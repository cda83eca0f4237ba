//! Datasets: the Planetoid citation format, train/validation/test splits,
//! synthetic generators, and a plain-text export format.

mod export;
mod planetoid;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkernel::Mat;

pub use export::{
    graph_dataset_files, node_dataset_files, parse_features_csv, parse_graphs_csv,
    parse_masks_csv, read_graph_dataset, read_node_dataset, write_graph_dataset,
    write_node_dataset, FeatureTable, GraphRow, EDGES_FILE, FEATURES_FILE, GRAPHS_FILE,
    MASKS_FILE,
};
pub use planetoid::{load_planetoid, load_planetoid_dir, parse_cites, parse_content, ContentTable, LoadReport};
pub use split::{make_full_split, make_semi_split, stratified_assignment};
pub use synth::{
    gen_feature_sbm, gen_graph_classification, GraphClassSpec, GraphSynthConfig, SynthConfig,
    Topology,
};

/// Boolean node masks for the three splits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(Error::Input(format!(
                "mask lengths {}/{}/{} for {n} nodes",
                self.train.len(),
                self.val.len(),
                self.test.len()
            )));
        }
        for i in 0..n {
            let k = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if k > 1 {
                return Err(Error::Input(format!("node {i} is in more than one split")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDataset {
    pub graph: Graph,
    pub x: Mat,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub masks: Masks,
}

impl NodeDataset {
    pub fn new(graph: Graph, x: Mat, labels: Vec<usize>, num_classes: usize, masks: Masks) -> Result<Self> {
        let ds = Self {
            graph,
            x,
            labels,
            num_classes,
            masks,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_features(&self) -> usize {
        self.x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if self.x.rows() != n || self.labels.len() != n {
            return Err(Error::Input(format!(
                "{n} nodes but {} feature rows and {} labels",
                self.x.rows(),
                self.labels.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Input(format!(
                "label {bad} outside 0..{}",
                self.num_classes
            )));
        }
        if !self.x.is_finite() {
            return Err(Error::Input("features contain non-finite values".into()));
        }
        self.masks.validate(n)
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.n())?;
        self.masks = masks;
        Ok(self)
    }

    /// Scales every feature row to unit sum (rows summing to zero are left
    /// unchanged).
    pub fn row_normalized(mut self) -> Self {
        self.x = self.x.row_normalized();
        self
    }

    /// Restricts the dataset to `nodes` (renumbered in the given order).
    pub fn subset(&self, nodes: &[usize]) -> NodeDataset {
        let pick = |m: &[bool]| nodes.iter().map(|&i| m[i]).collect();
        NodeDataset {
            graph: self.graph.induced_subgraph(nodes),
            x: self.x.select_rows(nodes),
            labels: nodes.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            masks: Masks {
                train: pick(&self.masks.train),
                val: pick(&self.masks.val),
                test: pick(&self.masks.test),
            },
        }
    }

    /// The subset on the largest connected component.
    pub fn largest_component(&self) -> NodeDataset {
        let (_, nodes) = self.graph.largest_component();
        self.subset(&nodes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphItem {
    pub graph: Graph,
    pub x: Mat,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDataset {
    pub items: Vec<GraphItem>,
    pub num_classes: usize,
}

impl GraphDataset {
    pub fn new(items: Vec<GraphItem>, num_classes: usize) -> Result<Self> {
        let ds = Self { items, num_classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_features(&self) -> usize {
        self.items.first().map_or(0, |it| it.x.cols())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.num_features();
        for (k, it) in self.items.iter().enumerate() {
            if it.graph.n() == 0 {
                return Err(Error::Input(format!("graph {k} is empty")));
            }
            if it.x.shape() != (it.graph.n(), d) {
                return Err(Error::Input(format!(
                    "graph {k}: features {:?} for {} nodes, width {d} expected",
                    it.x.shape(),
                    it.graph.n()
                )));
            }
            if it.label >= self.num_classes {
                return Err(Error::Input(format!(
                    "graph {k}: label {} outside 0..{}",
                    it.label, self.num_classes
                )));
            }
        }
        Ok(())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.items.len())
            .filter(|&k| self.items[k].split == split)
            .collect()
    }
}
