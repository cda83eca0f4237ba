use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState, Trainable};
use super::loss::{argmax, cross_entropy_masked, evaluate};
use crate::data::{GraphDataset, NodeDataset, Split};
use crate::error::{Error, Result};
use crate::gnn::{
    init_params, model_backward, model_forward, sum_pool_backward, sum_pool_readout,
    AttentionScope, GsaLayerParams, ModelSpec,
};
use crate::graph::{normalize_adjacency, NormalizedAdjacency};
use crate::numkernel::Mat;
use crate::rng;

/// Layers whose matrices receive the L2 term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayScope {
    /// Only the first layer, as in the common two-layer GCN setup.
    #[default]
    FirstLayer,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay_scope: DecayScope,
    pub epochs: usize,
    pub seed: u64,
    /// Early stopping on validation loss; 0 disables it.
    pub patience: usize,
    /// Overrides the dropout rate of the model spec.
    pub dropout: f64,
    /// Pins every `gamma` to this value and stops training it.
    pub gamma_freeze: Option<f64>,
    /// Graphs per mini-batch (graph classification only).
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::node_defaults()
    }
}

impl TrainConfig {
    pub fn node_defaults() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            decay_scope: DecayScope::FirstLayer,
            epochs: 200,
            seed: 0,
            patience: 10,
            dropout: 0.5,
            gamma_freeze: None,
            batch_size: 32,
        }
    }

    pub fn graph_defaults() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 1e-4,
            decay_scope: DecayScope::All,
            epochs: 150,
            seed: 0,
            patience: 0,
            dropout: 0.0,
            gamma_freeze: None,
            batch_size: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Param(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Param(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Param("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Param(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if let Some(g) = self.gamma_freeze {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::Param(format!("frozen gamma must be non-negative, got {g}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Param("batch size must be positive".into()));
        }
        Ok(())
    }

    fn trainables(&self, spec: &ModelSpec) -> Vec<Trainable> {
        spec.attention
            .iter()
            .enumerate()
            .map(|(l, &att)| Trainable {
                attention: att && self.gamma_freeze != Some(0.0),
                gamma: att && self.gamma_freeze.is_none(),
                decay: match self.decay_scope {
                    DecayScope::FirstLayer => l == 0,
                    DecayScope::All => true,
                },
            })
            .collect()
    }

    fn initial_params(&self, spec: &ModelSpec) -> Result<Vec<GsaLayerParams>> {
        let mut params = init_params(spec, self.seed)?;
        if let Some(g) = self.gamma_freeze {
            params.iter_mut().for_each(|p| p.gamma = g);
        }
        Ok(params)
    }
}

/// Metrics of one epoch, measured with the parameters at the start of the
/// epoch (before that epoch's update).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// `gamma` of every layer with attention enabled, bottom to top.
    pub gamma_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: Vec<GsaLayerParams>,
    pub history: Vec<MetricsRecord>,
    /// Epoch whose start-of-epoch parameters were returned, or the number of
    /// epochs run when the parameters after the last update were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// The returned parameters evaluated without dropout; `train_loss` here is
    /// the evaluation-mode loss.
    pub final_metrics: MetricsRecord,
}

fn gamma_values(spec: &ModelSpec, params: &[GsaLayerParams]) -> Vec<f64> {
    params
        .iter()
        .zip(&spec.attention)
        .filter(|&(_, &a)| a)
        .map(|(p, _)| p.gamma)
        .collect()
}

/// Logits in evaluation mode (no dropout).
pub fn predict(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    x: &Mat,
) -> Result<Mat> {
    Ok(model_forward(spec, params, na, x, &AttentionScope::Global, None)?.0)
}

fn check_masks(ds: &NodeDataset) -> Result<()> {
    ds.validate()?;
    let (tr, va, te) = ds.masks.counts();
    if tr == 0 || va == 0 || te == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Hook invoked after each epoch's metrics are measured, with the
/// parameters they were measured on.
pub type EpochHook<'a> = &'a mut dyn FnMut(&MetricsRecord, &[GsaLayerParams]);

/// Full-batch training on one graph. The model spec's dropout is replaced by
/// `cfg.dropout`.
pub fn train_node_classifier(spec: &ModelSpec, ds: &NodeDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_node_classifier_with(spec, ds, cfg, &mut |_, _| {})
}

pub fn train_node_classifier_with(
    spec: &ModelSpec,
    ds: &NodeDataset,
    cfg: &TrainConfig,
    hook: EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_masks(ds)?;
    let spec = ModelSpec {
        dropout: cfg.dropout,
        ..spec.clone()
    };
    spec.validate()?;
    if spec.layer_dims.first() != Some(&ds.num_features()) || spec.layer_dims.last() != Some(&ds.num_classes) {
        return Err(Error::Param(format!(
            "model widths {:?} do not match {} features and {} classes",
            spec.layer_dims,
            ds.num_features(),
            ds.num_classes
        )));
    }
    let na = normalize_adjacency(&ds.graph);
    let trainable = cfg.trainables(&spec);
    let mut params = cfg.initial_params(&spec)?;
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<GsaLayerParams>)> = None;
    let mut bad_epochs = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut dropout = rng::indexed_stream(cfg.seed, rng::DROPOUT, epoch as u64);
        let (logits, cache) = model_forward(&spec, &params, &na, &ds.x, &AttentionScope::Global, Some(&mut dropout))?;
        let (train_loss, grad) = cross_entropy_masked(&logits, &ds.labels, &ds.masks.train)?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }

        let eval_logits = predict(&spec, &params, &na, &ds.x)?;
        let (val_loss, _) = cross_entropy_masked(&eval_logits, &ds.labels, &ds.masks.val)?;
        let record = MetricsRecord {
            epoch,
            train_loss,
            train_acc: evaluate(&eval_logits, &ds.labels, &ds.masks.train)?,
            val_loss,
            val_acc: evaluate(&eval_logits, &ds.labels, &ds.masks.val)?,
            test_acc: evaluate(&eval_logits, &ds.labels, &ds.masks.test)?,
            gamma_values: gamma_values(&spec, &params),
        };
        hook(&record, &params);
        history.push(record);

        if cfg.patience > 0 {
            if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                best = Some((val_loss, epoch, params.clone()));
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }

        let grads = model_backward(&spec, &params, &na, &cache, &grad)?;
        adam_step(&mut params, &grads, &mut state, cfg.learning_rate, cfg.weight_decay, &trainable)?;
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, epoch),
        None => (params, history.len()),
    };
    let final_metrics = node_metrics(&spec, &params, &na, ds, best_epoch)?;
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        stopped_early,
        final_metrics,
    })
}

fn node_metrics(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    ds: &NodeDataset,
    epoch: usize,
) -> Result<MetricsRecord> {
    let logits = predict(spec, params, na, &ds.x)?;
    let (train_loss, _) = cross_entropy_masked(&logits, &ds.labels, &ds.masks.train)?;
    let (val_loss, _) = cross_entropy_masked(&logits, &ds.labels, &ds.masks.val)?;
    Ok(MetricsRecord {
        epoch,
        train_loss,
        train_acc: evaluate(&logits, &ds.labels, &ds.masks.train)?,
        val_loss,
        val_acc: evaluate(&logits, &ds.labels, &ds.masks.val)?,
        test_acc: evaluate(&logits, &ds.labels, &ds.masks.test)?,
        gamma_values: gamma_values(spec, params),
    })
}

/// Evaluation-mode metrics of `params` on every split; `epoch` is 0.
pub fn evaluate_node_classifier(spec: &ModelSpec, params: &[GsaLayerParams], ds: &NodeDataset) -> Result<MetricsRecord> {
    check_masks(ds)?;
    node_metrics(spec, params, &normalize_adjacency(&ds.graph), ds, 0)
}

/// Evaluation-mode metrics of `params` on every split; `epoch` is 0.
pub fn evaluate_graph_classifier(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    ds: &GraphDataset,
    batch_size: usize,
) -> Result<MetricsRecord> {
    ds.validate()?;
    if batch_size == 0 {
        return Err(Error::Param("batch size must be positive".into()));
    }
    let nas: Vec<NormalizedAdjacency> = ds.items.iter().map(|it| normalize_adjacency(&it.graph)).collect();
    let idx = [Split::Train, Split::Val, Split::Test].map(|s| ds.indices(s));
    if let Some(k) = idx.iter().position(Vec::is_empty) {
        return Err(Error::Param(format!("split {k} has no graphs")));
    }
    graph_metrics(spec, params, ds, &nas, [&idx[0], &idx[1], &idx[2]], batch_size, 0)
}

/// A batch of graphs stacked into one block-diagonal problem.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub na: NormalizedAdjacency,
    pub x: Mat,
    pub sizes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl GraphBatch {
    pub fn new(ds: &GraphDataset, nas: &[NormalizedAdjacency], idx: &[usize]) -> Result<Self> {
        let blocks: Vec<&NormalizedAdjacency> = idx.iter().map(|&k| &nas[k]).collect();
        let xs: Vec<&Mat> = idx.iter().map(|&k| &ds.items[k].x).collect();
        Ok(Self {
            na: NormalizedAdjacency::block_diagonal(&blocks),
            x: Mat::vstack(&xs)?,
            sizes: idx.iter().map(|&k| ds.items[k].graph.n()).collect(),
            labels: idx.iter().map(|&k| ds.items[k].label).collect(),
        })
    }

    pub fn scope(&self) -> AttentionScope {
        AttentionScope::Segments(self.sizes.clone())
    }
}

/// Per-graph logits of a batch in evaluation mode: node logits are summed
/// per graph, attention stays inside each graph.
pub fn predict_graphs(spec: &ModelSpec, params: &[GsaLayerParams], batch: &GraphBatch) -> Result<Mat> {
    let (node_logits, _) = model_forward(spec, params, &batch.na, &batch.x, &batch.scope(), None)?;
    sum_pool_readout(&node_logits, &batch.sizes)
}

/// Mean loss and accuracy of the graphs in `idx`.
fn eval_graphs(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    ds: &GraphDataset,
    nas: &[NormalizedAdjacency],
    idx: &[usize],
    batch_size: usize,
) -> Result<(f64, f64)> {
    let (mut loss, mut hits) = (0.0, 0usize);
    for chunk in idx.chunks(batch_size) {
        let batch = GraphBatch::new(ds, nas, chunk)?;
        let logits = predict_graphs(spec, params, &batch)?;
        let (l, _) = cross_entropy_masked(&logits, &batch.labels, &vec![true; chunk.len()])?;
        loss += l * chunk.len() as f64;
        hits += (0..chunk.len())
            .filter(|&i| argmax(logits.row(i)) == batch.labels[i])
            .count();
    }
    Ok((loss / idx.len() as f64, hits as f64 / idx.len() as f64))
}

/// Mini-batch training with sum-pooling readout. Metrics are measured in
/// evaluation mode on every split at the start of each epoch.
pub fn train_graph_classifier(spec: &ModelSpec, ds: &GraphDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_graph_classifier_with(spec, ds, cfg, &mut |_, _| {})
}

pub fn train_graph_classifier_with(
    spec: &ModelSpec,
    ds: &GraphDataset,
    cfg: &TrainConfig,
    hook: EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ds.validate()?;
    let spec = ModelSpec {
        dropout: cfg.dropout,
        ..spec.clone()
    };
    spec.validate()?;
    if spec.layer_dims.first() != Some(&ds.num_features()) || spec.layer_dims.last() != Some(&ds.num_classes) {
        return Err(Error::Param(format!(
            "model widths {:?} do not match {} features and {} classes",
            spec.layer_dims,
            ds.num_features(),
            ds.num_classes
        )));
    }
    if ds.num_classes < 2 {
        return Err(Error::Param("graph classification needs at least two classes".into()));
    }
    let train_idx = ds.indices(Split::Train);
    let val_idx = ds.indices(Split::Val);
    let test_idx = ds.indices(Split::Test);
    for (name, idx) in [("train", &train_idx), ("val", &val_idx), ("test", &test_idx)] {
        if idx.len() < 2 {
            return Err(Error::Param(format!("{name} split has {} graphs, at least 2 required", idx.len())));
        }
    }
    let nas: Vec<NormalizedAdjacency> = ds.items.iter().map(|it| normalize_adjacency(&it.graph)).collect();
    let trainable = cfg.trainables(&spec);
    let mut params = cfg.initial_params(&spec)?;
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<GsaLayerParams>)> = None;
    let mut bad_epochs = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let record = graph_metrics(&spec, &params, ds, &nas, [&train_idx, &val_idx, &test_idx], cfg.batch_size, epoch)?;
        if !record.train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: record.train_loss,
            });
        }
        let val_loss = record.val_loss;
        hook(&record, &params);
        history.push(record);

        if cfg.patience > 0 {
            if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                best = Some((val_loss, epoch, params.clone()));
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }

        let mut order = train_idx.clone();
        order.shuffle(&mut rng::indexed_stream(cfg.seed, rng::BATCHES, epoch as u64));
        let mut dropout = rng::indexed_stream(cfg.seed, rng::DROPOUT, epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = GraphBatch::new(ds, &nas, chunk)?;
            let (node_logits, cache) =
                model_forward(&spec, &params, &batch.na, &batch.x, &batch.scope(), Some(&mut dropout))?;
            let logits = sum_pool_readout(&node_logits, &batch.sizes)?;
            let (loss, grad) = cross_entropy_masked(&logits, &batch.labels, &vec![true; chunk.len()])?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let node_grad = sum_pool_backward(&grad, &batch.sizes)?;
            let grads = model_backward(&spec, &params, &batch.na, &cache, &node_grad)?;
            adam_step(&mut params, &grads, &mut state, cfg.learning_rate, cfg.weight_decay, &trainable)?;
        }
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, epoch),
        None => (params, history.len()),
    };
    let final_metrics = graph_metrics(&spec, &params, ds, &nas, [&train_idx, &val_idx, &test_idx], cfg.batch_size, best_epoch)?;
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        stopped_early,
        final_metrics,
    })
}

fn graph_metrics(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    ds: &GraphDataset,
    nas: &[NormalizedAdjacency],
    [train_idx, val_idx, test_idx]: [&[usize]; 3],
    batch_size: usize,
    epoch: usize,
) -> Result<MetricsRecord> {
    let (train_loss, train_acc) = eval_graphs(spec, params, ds, nas, train_idx, batch_size)?;
    let (val_loss, val_acc) = eval_graphs(spec, params, ds, nas, val_idx, batch_size)?;
    let (_, test_acc) = eval_graphs(spec, params, ds, nas, test_idx, batch_size)?;
    Ok(MetricsRecord {
        epoch,
        train_loss,
        train_acc,
        val_loss,
        val_acc,
        test_acc,
        gamma_values: gamma_values(spec, params),
    })
}
