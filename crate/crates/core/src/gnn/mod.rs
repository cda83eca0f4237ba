//! GCN and globally self-attentive GCN layers, the layer stack, and their
//! reverse-mode gradients.

mod layer;
mod model;

pub use layer::{
    attention_dim, attention_output, attention_scores, gcn_layer_forward, glorot_uniform,
    gsa_layer_forward, gsa_layer_forward_scoped, layer_backward, scoped_softmax,
    sum_pool_backward, sum_pool_readout, Activation, AttentionCache, AttentionScope,
    GsaLayerParams, LayerCache, LayerGrads,
};
pub use model::{
    init_params, model_backward, model_forward, ModelCache, ModelSpec, DEFAULT_ATTN_DIVISOR,
    DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};

#[cfg(test)]
mod tests;
