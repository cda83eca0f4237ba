use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::split::stratified_assignment;
use super::{GraphDataset, GraphItem, Masks, NodeDataset, Split};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkernel::Mat;
use crate::rng;

/// Feature stochastic block model. Node `i` belongs to class `i mod k`.
/// Edges appear with probability `p_in` inside a class and
/// `min(1, p_out + cross_class_edge_boost)` across classes. Features are a
/// Gaussian class prototype plus `feature_noise`-scaled Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub cross_class_edge_boost: f64,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 120,
            num_classes: 3,
            p_in: 0.2,
            p_out: 0.02,
            feature_dim: 8,
            feature_noise: 0.5,
            cross_class_edge_boost: 0.0,
            seed: 0,
            train_frac: 0.3,
            val_frac: 0.2,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Param(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_prob("p_in", self.p_in)?;
        check_prob("p_out", self.p_out)?;
        check_prob("cross_class_edge_boost", self.cross_class_edge_boost)?;
        if self.n == 0 || self.num_classes == 0 || self.feature_dim == 0 {
            return Err(Error::Param(
                "n, num_classes and feature_dim must be positive".into(),
            ));
        }
        if !(self.feature_noise >= 0.0) || !self.feature_noise.is_finite() {
            return Err(Error::Param(format!(
                "feature_noise must be finite and non-negative, got {}",
                self.feature_noise
            )));
        }
        Ok(())
    }

    pub fn effective_p_out(&self) -> f64 {
        (self.p_out + self.cross_class_edge_boost).min(1.0)
    }
}

pub fn gen_feature_sbm(cfg: &SynthConfig) -> Result<NodeDataset> {
    cfg.validate()?;
    let (n, k) = (cfg.n, cfg.num_classes);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut r = rng::stream(cfg.seed, rng::SAMPLING);
    let p_out = cfg.effective_p_out();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let prototypes = Mat::from_fn(k, cfg.feature_dim, |_, _| StandardNormal.sample(&mut r));
    let x = Mat::from_fn(n, cfg.feature_dim, |i, j| {
        let noise: f64 = StandardNormal.sample(&mut r);
        prototypes.get(labels[i], j) + cfg.feature_noise * noise
    });
    let assign = stratified_assignment(
        &labels,
        k,
        cfg.train_frac,
        cfg.val_frac,
        &mut rng::stream(cfg.seed, rng::SPLITS),
    )?;
    let mut masks = Masks::empty(n);
    for (i, s) in assign.into_iter().enumerate() {
        match s {
            Split::Train => masks.train[i] = true,
            Split::Val => masks.val[i] = true,
            Split::Test => masks.test[i] = true,
        }
    }
    NodeDataset::new(Graph::new(n, edges)?, x, labels, k, masks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Path,
    Star,
    Cycle,
    Clique,
}

impl Topology {
    fn build(self, n: usize) -> Graph {
        match self {
            Topology::Path => Graph::path(n),
            Topology::Star => Graph::star(n),
            Topology::Cycle => Graph::cycle(n),
            Topology::Clique => Graph::complete(n),
        }
    }

    fn min_nodes(self) -> usize {
        match self {
            Topology::Path | Topology::Clique => 1,
            Topology::Star => 2,
            Topology::Cycle => 3,
        }
    }
}

/// One class of the graph-classification generator: a topology family with
/// a node-count range and a feature prototype index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphClassSpec {
    pub topology: Topology,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub prototype: usize,
}

/// Small graphs whose class is the pair (topology, prototype). Node features
/// are a one-hot degree block of width `max_nodes` followed by the unit
/// prototype vector `e_prototype` (width `prototype_dim`) plus Gaussian
/// noise of scale `noise` on the prototype block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSynthConfig {
    pub classes: Vec<GraphClassSpec>,
    pub graphs_per_class: usize,
    pub prototype_dim: usize,
    pub noise: f64,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for GraphSynthConfig {
    fn default() -> Self {
        let families = [
            (Topology::Path, 3, 8),
            (Topology::Star, 4, 8),
            (Topology::Cycle, 3, 8),
            (Topology::Clique, 4, 8),
        ];
        let classes = families
            .iter()
            .flat_map(|&(topology, min_nodes, max_nodes)| {
                (0..2).map(move |prototype| GraphClassSpec {
                    topology,
                    min_nodes,
                    max_nodes,
                    prototype,
                })
            })
            .collect();
        Self {
            classes,
            graphs_per_class: 40,
            prototype_dim: 2,
            noise: 0.3,
            seed: 0,
            train_frac: 0.6,
            val_frac: 0.2,
        }
    }
}

impl GraphSynthConfig {
    pub fn max_nodes(&self) -> usize {
        self.classes.iter().map(|c| c.max_nodes).max().unwrap_or(1)
    }

    pub fn feature_dim(&self) -> usize {
        self.max_nodes() + self.prototype_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.graphs_per_class == 0 {
            return Err(Error::Param("need at least one class and one graph per class".into()));
        }
        for c in &self.classes {
            if c.min_nodes < c.topology.min_nodes() || c.min_nodes > c.max_nodes {
                return Err(Error::Param(format!(
                    "{:?} needs {}..={} nodes with at least {}",
                    c.topology,
                    c.min_nodes,
                    c.max_nodes,
                    c.topology.min_nodes()
                )));
            }
            if c.prototype >= self.prototype_dim {
                return Err(Error::Param(format!(
                    "prototype {} outside 0..{}",
                    c.prototype, self.prototype_dim
                )));
            }
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Param(format!("noise must be non-negative, got {}", self.noise)));
        }
        Ok(())
    }
}

pub fn gen_graph_classification(cfg: &GraphSynthConfig) -> Result<GraphDataset> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, rng::SAMPLING);
    let width = cfg.max_nodes();
    let d = cfg.feature_dim();
    let mut items = Vec::new();
    for (label, class) in cfg.classes.iter().enumerate() {
        for _ in 0..cfg.graphs_per_class {
            let nodes = r.random_range(class.min_nodes..=class.max_nodes);
            let graph = class.topology.build(nodes);
            let degrees = graph.degrees();
            let mut x = Mat::zeros(nodes, d);
            for (i, &deg) in degrees.iter().enumerate() {
                x.set(i, deg.min(width - 1), 1.0);
                for p in 0..cfg.prototype_dim {
                    let base = if p == class.prototype { 1.0 } else { 0.0 };
                    let noise: f64 = StandardNormal.sample(&mut r);
                    x.set(i, width + p, base + cfg.noise * noise);
                }
            }
            items.push(GraphItem {
                graph,
                x,
                label,
                split: Split::Test,
            });
        }
    }
    let labels: Vec<usize> = items.iter().map(|it| it.label).collect();
    let assign = stratified_assignment(
        &labels,
        cfg.classes.len(),
        cfg.train_frac,
        cfg.val_frac,
        &mut rng::stream(cfg.seed, rng::SPLITS),
    )?;
    for (it, s) in items.iter_mut().zip(assign) {
        it.split = s;
    }
    GraphDataset::new(items, cfg.classes.len())
}
