use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::numkernel::{softmax_in_place, Mat};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: &Mat) -> Mat {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    /// Multiplies `grad` by the activation derivative at `z`.
    fn backprop(self, z: &Mat, grad: &Mat) -> Mat {
        match self {
            Activation::Relu => Mat::from_fn(z.rows(), z.cols(), |i, j| {
                if z.get(i, j) > 0.0 {
                    grad.get(i, j)
                } else {
                    0.0
                }
            }),
            Activation::Identity => grad.clone(),
        }
    }
}

/// Trainables of one layer. `w` is the convolution weight; `wl`, `wr` project
/// features for the attention scores, `wh` down-projects the attended
/// features and `wg` maps them back to the input width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsaLayerParams {
    pub w: Mat,
    pub wl: Mat,
    pub wr: Mat,
    pub wh: Mat,
    pub wg: Mat,
    pub gamma: f64,
}

/// Gradients share the parameter layout.
pub type LayerGrads = GsaLayerParams;

/// Attention width for an input width: `max(1, d_in / divisor)`.
pub fn attention_dim(d_in: usize, divisor: usize) -> usize {
    (d_in / divisor.max(1)).max(1)
}

pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
}

impl GsaLayerParams {
    /// Glorot-initialized parameters with `gamma = 0`. The convolution weight
    /// and the attention weights come from separate streams so models with
    /// and without attention start from the same `w`.
    pub fn init(
        d_in: usize,
        d_out: usize,
        d_att: usize,
        weights: &mut Rng,
        attention: &mut Rng,
    ) -> Self {
        let w = glorot_uniform(d_in, d_out, weights);
        let wl = glorot_uniform(d_in, d_att, attention);
        let wr = glorot_uniform(d_in, d_att, attention);
        let wh = glorot_uniform(d_in, d_att, attention);
        let wg = glorot_uniform(d_att, d_in, attention);
        Self {
            w,
            wl,
            wr,
            wh,
            wg,
            gamma: 0.0,
        }
    }

    pub fn zeros(d_in: usize, d_out: usize, d_att: usize) -> Self {
        Self {
            w: Mat::zeros(d_in, d_out),
            wl: Mat::zeros(d_in, d_att),
            wr: Mat::zeros(d_in, d_att),
            wh: Mat::zeros(d_in, d_att),
            wg: Mat::zeros(d_att, d_in),
            gamma: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in(), self.d_out(), self.d_att())
    }

    pub fn d_in(&self) -> usize {
        self.w.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w.cols()
    }

    pub fn d_att(&self) -> usize {
        self.wl.cols()
    }

    pub fn mats(&self) -> [&Mat; 5] {
        [&self.w, &self.wl, &self.wr, &self.wh, &self.wg]
    }

    pub fn mats_mut(&mut self) -> [&mut Mat; 5] {
        [
            &mut self.w,
            &mut self.wl,
            &mut self.wr,
            &mut self.wh,
            &mut self.wg,
        ]
    }

    /// Checks that all matrices agree on `d_in`, `d_out` and `d_att`.
    pub fn validate(&self) -> Result<()> {
        let (d, a) = (self.d_in(), self.d_att());
        let ok = a >= 1
            && self.wl.shape() == (d, a)
            && self.wr.shape() == (d, a)
            && self.wh.shape() == (d, a)
            && self.wg.shape() == (a, d);
        if !ok {
            return Err(shape_err(
                "layer params",
                format!(
                    "w {:?}, wl {:?}, wr {:?}, wh {:?}, wg {:?}",
                    self.w.shape(),
                    self.wl.shape(),
                    self.wr.shape(),
                    self.wh.shape(),
                    self.wg.shape()
                ),
            ));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Param(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Number of scalar trainables.
    pub fn len(&self) -> usize {
        self.mats().iter().map(|m| m.as_slice().len()).sum::<usize>() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which node pairs may attend to each other.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum AttentionScope {
    /// Every node attends over all nodes.
    #[default]
    Global,
    /// Rows are partitioned into consecutive segments of the given sizes and
    /// attention never crosses a segment boundary (graph batches).
    Segments(Vec<usize>),
}

impl AttentionScope {
    fn check(&self, n: usize) -> Result<()> {
        if let AttentionScope::Segments(sizes) = self {
            let total: usize = sizes.iter().sum();
            if total != n || sizes.contains(&0) {
                return Err(shape_err(
                    "attention scope",
                    format!("segments {sizes:?} do not partition {n} rows"),
                ));
            }
        }
        Ok(())
    }
}

/// `S = (h·wl)(h·wr)ᵀ`.
pub fn attention_scores(h: &Mat, wl: &Mat, wr: &Mat) -> Result<Mat> {
    if wl.shape() != wr.shape() {
        return Err(shape_err(
            "attention_scores",
            format!("wl {:?} vs wr {:?}", wl.shape(), wr.shape()),
        ));
    }
    h.matmul(wl)?.matmul_t(&h.matmul(wr)?)
}

/// `O = (mask·h·wh)·wg`.
pub fn attention_output(h: &Mat, mask: &Mat, wh: &Mat, wg: &Mat) -> Result<Mat> {
    if mask.shape() != (h.rows(), h.rows()) {
        return Err(shape_err(
            "attention_output",
            format!("mask {:?} for {} rows", mask.shape(), h.rows()),
        ));
    }
    mask.matmul(&h.matmul(wh)?)?.matmul(wg)
}

/// Row softmax restricted to the scope; entries outside a row's segment are 0.
pub fn scoped_softmax(s: &Mat, scope: &AttentionScope) -> Result<Mat> {
    scope.check(s.rows())?;
    match scope {
        AttentionScope::Global => Ok(crate::numkernel::row_softmax(s)),
        AttentionScope::Segments(sizes) => {
            let mut b = Mat::zeros(s.rows(), s.cols());
            let mut start = 0;
            for &len in sizes {
                for i in start..start + len {
                    let row = b.row_mut(i);
                    row[start..start + len].copy_from_slice(&s.row(i)[start..start + len]);
                    softmax_in_place(&mut row[start..start + len]);
                }
                start += len;
            }
            Ok(b)
        }
    }
}

/// Intermediates of the attention branch.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    /// `h·wl`
    pub proj_l: Mat,
    /// `h·wr`
    pub proj_r: Mat,
    pub scores: Mat,
    /// Row-stochastic attention mask `B`.
    pub mask: Mat,
    /// `h·wh`
    pub proj_h: Mat,
    /// `B·h·wh`
    pub attended: Mat,
    /// `O`
    pub attn_out: Mat,
}

#[derive(Clone, Debug)]
pub struct LayerCache {
    pub h_in: Mat,
    /// `Ã·h`
    pub aggregated: Mat,
    pub attention: Option<AttentionCache>,
    /// `Ã·h + γ·O` (equal to `aggregated` without attention)
    pub mixed: Mat,
    pub pre_activation: Mat,
    pub activation: Activation,
    pub gamma: f64,
}

fn check_input(na: &NormalizedAdjacency, h: &Mat, w: &Mat, op: &'static str) -> Result<()> {
    if na.mat.rows() != h.rows() || h.cols() != w.rows() {
        return Err(shape_err(
            op,
            format!(
                "adjacency {:?}, h {:?}, w {:?}",
                na.mat.shape(),
                h.shape(),
                w.shape()
            ),
        ));
    }
    Ok(())
}

/// `act(Ã·h·w)`, evaluated as `(Ã·h)·w`.
pub fn gcn_layer_forward(
    na: &NormalizedAdjacency,
    h: &Mat,
    w: &Mat,
    act: Activation,
) -> Result<(Mat, LayerCache)> {
    check_input(na, h, w, "gcn_layer_forward")?;
    let aggregated = na.mat.matmul(h)?;
    let pre = aggregated.matmul(w)?;
    let out = act.apply(&pre);
    Ok((
        out,
        LayerCache {
            h_in: h.clone(),
            mixed: aggregated.clone(),
            aggregated,
            attention: None,
            pre_activation: pre,
            activation: act,
            gamma: 0.0,
        },
    ))
}

/// `act((Ã·h + γ·O)·w)` with global attention over all nodes.
pub fn gsa_layer_forward(
    na: &NormalizedAdjacency,
    h: &Mat,
    p: &GsaLayerParams,
    act: Activation,
) -> Result<(Mat, LayerCache)> {
    gsa_layer_forward_scoped(na, h, p, act, &AttentionScope::Global)
}

pub fn gsa_layer_forward_scoped(
    na: &NormalizedAdjacency,
    h: &Mat,
    p: &GsaLayerParams,
    act: Activation,
    scope: &AttentionScope,
) -> Result<(Mat, LayerCache)> {
    check_input(na, h, &p.w, "gsa_layer_forward")?;
    p.validate()?;
    let aggregated = na.mat.matmul(h)?;

    let proj_l = h.matmul(&p.wl)?;
    let proj_r = h.matmul(&p.wr)?;
    let scores = proj_l.matmul_t(&proj_r)?;
    let mask = scoped_softmax(&scores, scope)?;
    let proj_h = h.matmul(&p.wh)?;
    let attended = mask.matmul(&proj_h)?;
    let attn_out = attended.matmul(&p.wg)?;

    let mut mixed = aggregated.clone();
    mixed.add_scaled(p.gamma, &attn_out)?;
    let pre = mixed.matmul(&p.w)?;
    let out = act.apply(&pre);
    Ok((
        out,
        LayerCache {
            h_in: h.clone(),
            aggregated,
            attention: Some(AttentionCache {
                proj_l,
                proj_r,
                scores,
                mask,
                proj_h,
                attended,
                attn_out,
            }),
            mixed,
            pre_activation: pre,
            activation: act,
            gamma: p.gamma,
        },
    ))
}

/// Reverse pass through one layer. Returns `∂L/∂h_in` and the parameter
/// gradients. For a cache without attention only `w` receives a gradient.
pub fn layer_backward(
    na: &NormalizedAdjacency,
    cache: &LayerCache,
    p: &GsaLayerParams,
    grad_out: &Mat,
) -> Result<(Mat, LayerGrads)> {
    let (gh, grads) = layer_backward_inner(na, cache, p, grad_out, true)?;
    Ok((gh.expect("input gradient requested"), grads))
}

/// As [`layer_backward`], skipping the input gradient when it is not needed
/// (the first layer of a model).
pub(crate) fn layer_backward_inner(
    na: &NormalizedAdjacency,
    cache: &LayerCache,
    p: &GsaLayerParams,
    grad_out: &Mat,
    need_input_grad: bool,
) -> Result<(Option<Mat>, LayerGrads)> {
    if cache.pre_activation.shape() != grad_out.shape()
        || cache.h_in.cols() != p.d_in()
        || cache.pre_activation.cols() != p.d_out()
    {
        return Err(Error::CacheMismatch(format!(
            "cache h_in {:?} / output {:?}, params {}x{}, grad {:?}",
            cache.h_in.shape(),
            cache.pre_activation.shape(),
            p.d_in(),
            p.d_out(),
            grad_out.shape()
        )));
    }
    if cache.attention.is_some() && cache.gamma != p.gamma {
        return Err(Error::CacheMismatch(format!(
            "cache gamma {} differs from params gamma {}",
            cache.gamma, p.gamma
        )));
    }
    let h = &cache.h_in;
    let mut grads = p.zeros_like();

    let dz = cache.activation.backprop(&cache.pre_activation, grad_out);
    grads.w = cache.mixed.t_matmul(&dz)?;
    let dm = dz.matmul_t(&p.w)?;
    // Ã is symmetric, so Ãᵀ·dm = Ã·dm.
    let mut dh = need_input_grad.then(|| na.mat.matmul(&dm)).transpose()?;

    if let Some(att) = &cache.attention {
        grads.gamma = dm.dot(&att.attn_out)?;
        if p.gamma != 0.0 {
            let d_out = dm.scale(p.gamma);
            grads.wg = att.attended.t_matmul(&d_out)?;
            let d_att = d_out.matmul_t(&p.wg)?;
            let d_mask = d_att.matmul_t(&att.proj_h)?;
            let d_proj_h = att.mask.t_matmul(&d_att)?;
            grads.wh = h.t_matmul(&d_proj_h)?;

            let d_scores = softmax_backward(&att.mask, &d_mask);
            let d_proj_l = d_scores.matmul(&att.proj_r)?;
            let d_proj_r = d_scores.t_matmul(&att.proj_l)?;
            grads.wl = h.t_matmul(&d_proj_l)?;
            grads.wr = h.t_matmul(&d_proj_r)?;

            if let Some(dh) = dh.as_mut() {
                dh.add_scaled(1.0, &d_proj_h.matmul_t(&p.wh)?)?;
                dh.add_scaled(1.0, &d_proj_l.matmul_t(&p.wl)?)?;
                dh.add_scaled(1.0, &d_proj_r.matmul_t(&p.wr)?)?;
            }
        }
    }
    Ok((dh, grads))
}

/// `dS = B ⊙ (dB − rowsum(B ⊙ dB))`, the row-softmax Jacobian contraction.
/// Entries where `B` is zero (outside an attention segment) stay zero.
fn softmax_backward(b: &Mat, db: &Mat) -> Mat {
    let mut ds = Mat::zeros(b.rows(), b.cols());
    for i in 0..b.rows() {
        let (br, gr) = (b.row(i), db.row(i));
        let inner: f64 = br.iter().zip(gr).map(|(x, y)| x * y).sum();
        for ((o, &x), &y) in ds.row_mut(i).iter_mut().zip(br).zip(gr) {
            *o = x * (y - inner);
        }
    }
    ds
}

/// One row per graph holding the sum of that graph's node rows.
pub fn sum_pool_readout(h: &Mat, sizes: &[usize]) -> Result<Mat> {
    if sizes.iter().sum::<usize>() != h.rows() {
        return Err(shape_err(
            "sum_pool_readout",
            format!("sizes {sizes:?} do not partition {} rows", h.rows()),
        ));
    }
    let mut out = Mat::zeros(sizes.len(), h.cols());
    let mut start = 0;
    for (g, &len) in sizes.iter().enumerate() {
        let row = out.row_mut(g);
        for i in start..start + len {
            for (o, &v) in row.iter_mut().zip(h.row(i)) {
                *o += v;
            }
        }
        start += len;
    }
    Ok(out)
}

/// Adjoint of [`sum_pool_readout`]: each node row receives its graph's
/// gradient row.
pub fn sum_pool_backward(grad: &Mat, sizes: &[usize]) -> Result<Mat> {
    if grad.rows() != sizes.len() {
        return Err(shape_err(
            "sum_pool_backward",
            format!("{} gradient rows for {} graphs", grad.rows(), sizes.len()),
        ));
    }
    let n: usize = sizes.iter().sum();
    let mut out = Mat::zeros(n, grad.cols());
    let mut start = 0;
    for (g, &len) in sizes.iter().enumerate() {
        for i in start..start + len {
            out.row_mut(i).copy_from_slice(grad.row(g));
        }
        start += len;
    }
    Ok(out)
}
