use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layer::{
    attention_dim, gcn_layer_forward, gsa_layer_forward_scoped, layer_backward_inner,
    Activation, AttentionScope, GsaLayerParams, LayerCache, LayerGrads,
};
use crate::error::{shape_err, Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::numkernel::Mat;
use crate::rng::{self, Rng};

/// Architecture of a layer stack. `layer_dims` lists the widths from the
/// input features to the class count, so a stack has `layer_dims.len() - 1`
/// layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layer_dims: Vec<usize>,
    pub attention: Vec<bool>,
    pub activation: Activation,
    pub dropout: f64,
    pub attn_dim_divisor: usize,
}

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_ATTN_DIVISOR: usize = 8;

impl ModelSpec {
    /// Two-layer classifier with hidden width 16, relu and dropout 0.5.
    pub fn two_layer(d_in: usize, classes: usize, attention: bool) -> Self {
        Self::stack(d_in, DEFAULT_HIDDEN, classes, 2, attention)
    }

    /// `depth` layers with every hidden width equal to `width`.
    pub fn stack(d_in: usize, width: usize, classes: usize, depth: usize, attention: bool) -> Self {
        let depth = depth.max(1);
        let mut layer_dims = vec![d_in];
        layer_dims.extend(std::iter::repeat_n(width, depth - 1));
        layer_dims.push(classes);
        Self {
            layer_dims,
            attention: vec![attention; depth],
            activation: Activation::Relu,
            dropout: DEFAULT_DROPOUT,
            attn_dim_divisor: DEFAULT_ATTN_DIVISOR,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn with_attention(mut self, enabled: bool) -> Self {
        self.attention = vec![enabled; self.num_layers()];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.num_layers();
        if layers == 0 {
            return Err(Error::Param("a model needs at least one layer".into()));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Param(format!(
                "layer widths must be positive: {:?}",
                self.layer_dims
            )));
        }
        if self.attention.len() != layers {
            return Err(Error::Param(format!(
                "{} attention flags for {layers} layers",
                self.attention.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Param(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.attn_dim_divisor == 0 {
            return Err(Error::Param("attention divisor must be positive".into()));
        }
        Ok(())
    }

    fn check_params(&self, params: &[GsaLayerParams]) -> Result<()> {
        self.validate()?;
        if params.len() != self.num_layers() {
            return Err(shape_err(
                "model params",
                format!("{} layers of params for {} layers", params.len(), self.num_layers()),
            ));
        }
        for (l, p) in params.iter().enumerate() {
            p.validate()?;
            if p.w.shape() != (self.layer_dims[l], self.layer_dims[l + 1]) {
                return Err(shape_err(
                    "model params",
                    format!("layer {l} weight {:?}", p.w.shape()),
                ));
            }
        }
        Ok(())
    }
}

/// Seeded initial parameters. Every layer carries attention weights whether
/// or not the model spec enables attention, and they are drawn from their own
/// stream, so two specs differing only in attention flags share `w`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<Vec<GsaLayerParams>> {
    spec.validate()?;
    let mut wr = rng::stream(seed, rng::INIT_WEIGHTS);
    let mut ar = rng::stream(seed, rng::INIT_ATTENTION);
    Ok(spec
        .layer_dims
        .windows(2)
        .map(|d| {
            let d_att = attention_dim(d[0], spec.attn_dim_divisor);
            GsaLayerParams::init(d[0], d[1], d_att, &mut wr, &mut ar)
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct ModelCache {
    pub layers: Vec<LayerCache>,
    /// Inverted-dropout multipliers applied to each layer input (training only).
    pub dropout_masks: Vec<Option<Mat>>,
    /// Output of every layer before dropout; the last entry is the logits.
    pub outputs: Vec<Mat>,
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Mat {
    let keep = 1.0 / (1.0 - rate);
    Mat::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// Runs the stack. Hidden layers use `spec.activation`, the last layer is
/// linear. Dropout is applied to every layer input when `dropout_rng` is
/// given and the rate is positive.
pub fn model_forward(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    x: &Mat,
    scope: &AttentionScope,
    mut dropout_rng: Option<&mut Rng>,
) -> Result<(Mat, ModelCache)> {
    spec.check_params(params)?;
    let layers = spec.num_layers();
    let mut cache = ModelCache {
        layers: Vec::with_capacity(layers),
        dropout_masks: Vec::with_capacity(layers),
        outputs: Vec::with_capacity(layers),
    };
    let mut h = x.clone();
    for (l, p) in params.iter().enumerate() {
        let mask = match dropout_rng.as_deref_mut() {
            Some(r) if spec.dropout > 0.0 => {
                let m = dropout_mask(h.rows(), h.cols(), spec.dropout, r);
                h = h.hadamard(&m)?;
                Some(m)
            }
            _ => None,
        };
        let act = if l + 1 == layers {
            Activation::Identity
        } else {
            spec.activation
        };
        let (out, lc) = if spec.attention[l] {
            gsa_layer_forward_scoped(na, &h, p, act, scope)?
        } else {
            gcn_layer_forward(na, &h, &p.w, act)?
        };
        cache.dropout_masks.push(mask);
        cache.layers.push(lc);
        cache.outputs.push(out.clone());
        h = out;
    }
    Ok((h, cache))
}

/// Gradients of every layer's parameters given `∂L/∂logits`.
pub fn model_backward(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    cache: &ModelCache,
    grad_logits: &Mat,
) -> Result<Vec<LayerGrads>> {
    spec.check_params(params)?;
    if cache.layers.len() != params.len() {
        return Err(Error::CacheMismatch(format!(
            "{} cached layers for {} parameter sets",
            cache.layers.len(),
            params.len()
        )));
    }
    let mut grads: Vec<LayerGrads> = Vec::with_capacity(params.len());
    let mut g = grad_logits.clone();
    for l in (0..params.len()).rev() {
        let (gh, lg) = layer_backward_inner(na, &cache.layers[l], &params[l], &g, l > 0)?;
        grads.push(lg);
        if let Some(gh) = gh {
            g = match &cache.dropout_masks[l] {
                Some(m) => gh.hadamard(m)?,
                None => gh,
            };
        }
    }
    grads.reverse();
    Ok(grads)
}
