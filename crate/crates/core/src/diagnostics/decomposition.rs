use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::gnn::{attention_scores, scoped_softmax, AttentionScope, GsaLayerParams, ModelSpec};
use crate::graph::{complement_adjacency, ComplementDiagonal, Graph, NormalizedAdjacency};
use crate::numkernel::{dot, Mat};

/// Which node features weight a disconnected pair in the feature term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSimilarity {
    /// `⟨h_i, h_j⟩`: pairs that look alike before the last layer.
    #[default]
    Cross,
    /// `⟨h_i, h_i⟩`: the squared norm of the first node only.
    SelfNorm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionOptions {
    pub similarity: PairSimilarity,
    pub complement_diagonal: ComplementDiagonal,
}

/// Split of the last-layer loss argument into a re-weighted propagation
/// operator and a pairwise feature penalty. Serializes without the matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossDecomposition {
    /// `Ã + γ (Ā + L) ∘ B`
    #[serde(skip)]
    pub geometry_matrix: Mat,
    /// Penalty with negative similarities clamped to 0.
    pub feature_reg: f64,
    /// Penalty without clamping.
    pub feature_reg_raw: f64,
    pub gamma: f64,
    pub disconnected_pairs: usize,
    pub options: DecompositionOptions,
}

/// Summary statistics of a square matrix, for reports that should not carry
/// the full `n × n` payload.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub frobenius: f64,
    pub mean_row_sum: f64,
    /// Largest `|m_ij - ã_ij|`.
    pub max_abs_diff_from_adjacency: f64,
}

impl LossDecomposition {
    pub fn summary(&self, na: &NormalizedAdjacency) -> MatrixSummary {
        let m = &self.geometry_matrix;
        let vals = m.as_slice();
        let n = m.rows();
        let count = vals.len().max(1) as f64;
        let diff = if na.mat.shape() == m.shape() {
            m.sub(&na.mat).map(|d| d.max_abs()).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        MatrixSummary {
            n,
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: vals.iter().sum::<f64>() / count,
            frobenius: m.frobenius_norm(),
            mean_row_sum: vals.iter().sum::<f64>() / n.max(1) as f64,
            max_abs_diff_from_adjacency: diff,
        }
    }
}

pub fn loss_decomposition(
    h_prev: &Mat,
    h_last: &Mat,
    na: &NormalizedAdjacency,
    g: &Graph,
    mask: &Mat,
    gamma: f64,
) -> Result<LossDecomposition> {
    loss_decomposition_with(h_prev, h_last, na, g, mask, gamma, DecompositionOptions::default())
}

/// `geometry_matrix = Ã + γ(Ā + L)∘B` and
/// `feature_reg = γ/2 · Σ_{i≠j, A_ij=0} s_ij · ‖h_last_i − h_last_j‖²`
/// over ordered pairs, with `s_ij` chosen by `options.similarity`.
pub fn loss_decomposition_with(
    h_prev: &Mat,
    h_last: &Mat,
    na: &NormalizedAdjacency,
    g: &Graph,
    mask: &Mat,
    gamma: f64,
    options: DecompositionOptions,
) -> Result<LossDecomposition> {
    let n = g.n();
    if na.n() != n || mask.shape() != (n, n) || h_prev.rows() != n || h_last.rows() != n {
        return Err(shape_err(
            "loss_decomposition",
            format!(
                "graph {n}, adjacency {}, mask {:?}, h_prev {:?}, h_last {:?}",
                na.n(),
                mask.shape(),
                h_prev.shape(),
                h_last.shape()
            ),
        ));
    }
    if !gamma.is_finite() {
        return Err(Error::Param(format!("gamma must be finite, got {gamma}")));
    }

    let comp = complement_adjacency(g, options.complement_diagonal);
    let mut geometry = na.mat.clone();
    if gamma != 0.0 {
        // Ā + L: 2 on disconnected off-diagonal pairs, 1 on connected ones,
        // and Ā_ii on the diagonal
        let weights = Mat::from_fn(n, n, |i, j| comp.get(i, j) + if i == j { 0.0 } else { 1.0 });
        geometry.add_scaled(gamma, &weights.hadamard(mask)?)?;
    }

    let mut clamped = 0.0;
    let mut raw = 0.0;
    let mut pairs = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j || g.has_edge(i, j) {
                continue;
            }
            pairs += 1;
            let s = match options.similarity {
                PairSimilarity::Cross => dot(h_prev.row(i), h_prev.row(j)),
                PairSimilarity::SelfNorm => dot(h_prev.row(i), h_prev.row(i)),
            };
            let dist: f64 = h_last
                .row(i)
                .iter()
                .zip(h_last.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            raw += s * dist;
            clamped += s.max(0.0) * dist;
        }
    }
    let half = gamma / 2.0;
    Ok(LossDecomposition {
        geometry_matrix: geometry,
        feature_reg: half * clamped,
        feature_reg_raw: half * raw,
        gamma,
        disconnected_pairs: pairs,
        options,
    })
}

/// Decomposition of a trained stack's last layer: `h_prev` is the input to
/// the last layer, `h_last = h_prev · W_L`, and `B` the last layer's global
/// attention mask. `gamma` overrides the last layer's own `γ` when given, so
/// two checkpoints can be compared at a common interpolation weight.
pub fn decompose_model_loss(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    g: &Graph,
    x: &Mat,
    gamma: Option<f64>,
    options: DecompositionOptions,
) -> Result<LossDecomposition> {
    let (_, cache) = crate::gnn::model_forward(spec, params, na, x, &AttentionScope::Global, None)?;
    let last = params
        .last()
        .ok_or_else(|| Error::Input("model has no layers".into()))?;
    let h_prev = &cache.layers[cache.layers.len() - 1].h_in;
    let h_last = h_prev.matmul(&last.w)?;
    let mask = scoped_softmax(&attention_scores(h_prev, &last.wl, &last.wr)?, &AttentionScope::Global)?;
    let gamma = gamma.unwrap_or(if *spec.attention.last().unwrap_or(&false) {
        last.gamma
    } else {
        0.0
    });
    loss_decomposition_with(h_prev, &h_last, na, g, &mask, gamma, options)
}
