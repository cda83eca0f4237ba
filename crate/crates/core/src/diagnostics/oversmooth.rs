use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::gnn::{model_forward, AttentionScope, GsaLayerParams, LayerCache, ModelSpec};
use crate::graph::{shifted_from_normalized, spectral_gap, NormalizedAdjacency};
use crate::numkernel::{solve_spd, sym_eig_extreme, Cholesky, Lu, Mat};

/// Shift used when `Ã` itself cannot be factored.
pub const DEFAULT_EPS: f64 = 0.01;
/// `HᵀH` must have smallest eigenvalue above this to count as full rank.
pub const RANK_TOL: f64 = 1e-10;

fn require_connected(na: &NormalizedAdjacency) -> Result<()> {
    let comps = na.components();
    if comps.len() != 1 {
        return Err(Error::Disconnected {
            components: comps.len(),
        });
    }
    Ok(())
}

/// Frobenius distance from `h` to `span(e) ⊗ R^C`, `e = D^{1/2}1 / ‖D^{1/2}1‖`.
pub fn subspace_distance(h: &Mat, na: &NormalizedAdjacency) -> Result<f64> {
    if h.rows() != na.n() {
        return Err(shape_err(
            "subspace_distance",
            format!("h has {} rows, graph has {} nodes", h.rows(), na.n()),
        ));
    }
    require_connected(na)?;
    Ok(subspace_residual(h, &na.principal_vector()).frobenius_norm())
}

/// `h − e eᵀ h` for a unit vector `e`.
pub(crate) fn subspace_residual(h: &Mat, e: &[f64]) -> Mat {
    let coef: Vec<f64> = (0..h.cols())
        .map(|c| (0..h.rows()).map(|r| e[r] * h.get(r, c)).sum())
        .collect();
    Mat::from_fn(h.rows(), h.cols(), |r, c| h.get(r, c) - e[r] * coef[c])
}

/// Smallest eigenvalue of `hᵀh`; an assumption error if it is not above
/// [`RANK_TOL`].
pub(crate) fn check_full_column_rank(h: &Mat) -> Result<f64> {
    let gram = h.t_matmul(h)?;
    let (lo, _) = sym_eig_extreme(&gram)?;
    if !(lo > RANK_TOL) {
        return Err(Error::Assumption(format!(
            "h ({}x{}) is not of full column rank: smallest eigenvalue of hᵀh is {lo:e}",
            h.rows(),
            h.cols()
        )));
    }
    Ok(lo)
}

/// `Ã⁻¹ b`, falling back to the positive definite shift
/// `(1 + ε)I + offdiag(Ã)` when `Ã` is singular to working precision.
/// The flag reports whether the fallback was used.
pub fn apply_adjacency_inverse(na: &NormalizedAdjacency, b: &Mat) -> Result<(Mat, bool)> {
    match Lu::new(&na.mat) {
        Ok(lu) => Ok((lu.solve(b)?, false)),
        Err(Error::Singular { .. }) => {
            let shifted = shifted_from_normalized(na, DEFAULT_EPS)?;
            Ok((solve_spd(&shifted, b)?, true))
        }
        Err(e) => Err(e),
    }
}

/// `W̃ = (I + γ (HᵀH)⁻¹ Hᵀ Ã⁻¹ B H) W`.
///
/// `h·W̃` equals `(h + γ Ã⁻¹ B h) w` exactly when `Ã⁻¹ B h` lies in the
/// column space of `h`, which always holds for square invertible `h`; for a
/// tall `h` it is the least-squares fit. See [`effective_weight_residual`].
pub fn effective_weight(h: &Mat, na: &NormalizedAdjacency, mask: &Mat, gamma: f64, w: &Mat) -> Result<Mat> {
    let n = na.n();
    if h.rows() != n || mask.shape() != (n, n) || w.rows() != h.cols() {
        return Err(shape_err(
            "effective_weight",
            format!(
                "h {:?}, adjacency {n}, mask {:?}, w {:?}",
                h.shape(),
                mask.shape(),
                w.shape()
            ),
        ));
    }
    check_full_column_rank(h)?;
    if gamma == 0.0 {
        return Ok(w.clone());
    }
    let (inv_bh, _) = apply_adjacency_inverse(na, &mask.matmul(h)?)?;
    let gram = h.t_matmul(h)?;
    let coef = Cholesky::new(&gram)?.solve(&h.t_matmul(&inv_bh)?)?;
    let mut p = Mat::identity(h.cols());
    p.add_scaled(gamma, &coef)?;
    p.matmul(w)
}

/// `‖h·W̃ − (h + γ Ã⁻¹ B h) w‖_F / (‖h‖_F ‖w‖_F)`.
pub fn effective_weight_residual(
    h: &Mat,
    na: &NormalizedAdjacency,
    mask: &Mat,
    gamma: f64,
    w: &Mat,
    w_tilde: &Mat,
) -> Result<f64> {
    let (inv_bh, _) = apply_adjacency_inverse(na, &mask.matmul(h)?)?;
    let mut mixed = h.clone();
    mixed.add_scaled(gamma, &inv_bh)?;
    let target = mixed.matmul(w)?;
    let got = h.matmul(w_tilde)?;
    let scale = h.frobenius_norm() * w.frobenius_norm();
    Ok(got.sub(&target)?.frobenius_norm() / if scale > 0.0 { scale } else { 1.0 })
}

/// Largest singular value via the symmetric eigenproblem of `mᵀm`.
pub(crate) fn sigma_max(m: &Mat) -> Result<f64> {
    let gram = if m.rows() >= m.cols() {
        m.t_matmul(m)?
    } else {
        m.matmul_t(m)?
    };
    Ok(sym_eig_extreme(&gram)?.1.max(0.0).sqrt())
}

/// Per-layer trace of a plain stack and an attentive stack sharing weights.
/// Row 0 is the input; the weight columns are empty there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OversmoothReport {
    pub dm_plain: Vec<f64>,
    pub dm_gsa: Vec<f64>,
    /// `σ_max(W_l)`
    pub s: Vec<Option<f64>>,
    /// `σ_max(W̃_l)` where the layer input has full column rank.
    pub s_tilde: Vec<Option<f64>>,
    /// Layers whose input violated the full-rank assumption.
    pub rank_deficient: Vec<usize>,
    /// Relative residual of the effective-weight identity per layer.
    pub effective_residual: Vec<Option<f64>>,
    pub lambda: f64,
    pub gamma: f64,
}

impl OversmoothReport {
    pub fn depth(&self) -> usize {
        self.dm_plain.len().saturating_sub(1)
    }

    /// `dm_gsa / dm_plain` per row; `None` where the plain distance is 0.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.dm_plain
            .iter()
            .zip(&self.dm_gsa)
            .map(|(&p, &g)| if p > 0.0 { Some(g / p) } else { None })
            .collect()
    }

    /// CSV with header `layer,dm_plain,dm_gsa,s,s_tilde`.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("layer,dm_plain,dm_gsa,s,s_tilde\n");
        for l in 0..self.dm_plain.len() {
            out.push_str(&format!(
                "{l},{},{},{},{}\n",
                self.dm_plain[l],
                self.dm_gsa[l],
                cell(self.s[l]),
                cell(self.s_tilde[l])
            ));
        }
        out
    }
}

fn stack_trace(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    x: &Mat,
) -> Result<Vec<LayerCache>> {
    let (_, cache) = model_forward(spec, params, na, x, &AttentionScope::Global, None)?;
    Ok(cache.layers)
}

/// Runs the first `depth` layers of `params` twice on a connected graph: as a
/// plain stack and with attention enabled everywhere at interpolation weight
/// `gamma`. Every layer uses `spec.activation`, including the last traced one.
pub fn oversmooth_trace(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    x: &Mat,
    depth: usize,
    gamma: f64,
) -> Result<OversmoothReport> {
    if depth == 0 || depth > params.len() {
        return Err(Error::Param(format!(
            "depth {depth} outside 1..={} layers",
            params.len()
        )));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Param(format!("gamma must be finite and ≥ 0, got {gamma}")));
    }
    require_connected(na)?;
    let lambda = spectral_gap(na)?;

    let trace_spec = ModelSpec {
        layer_dims: spec.layer_dims[..=depth].to_vec(),
        attention: vec![false; depth],
        dropout: 0.0,
        ..spec.clone()
    };
    trace_spec.validate()?;
    // the model's last layer is linear; the trace keeps the hidden activation
    // throughout, so run one layer deeper with a dummy head and drop it
    let mut plain_params: Vec<GsaLayerParams> = params[..depth].to_vec();
    let mut gsa_params = plain_params.clone();
    gsa_params.iter_mut().for_each(|p| p.gamma = gamma);
    let width = spec.layer_dims[depth];
    let head = GsaLayerParams::zeros(width, 1, 1);
    plain_params.push(head.clone());
    gsa_params.push(head);
    let mut run_spec = trace_spec.clone();
    run_spec.layer_dims.push(1);
    run_spec.attention.push(false);

    let plain = stack_trace(&run_spec, &plain_params, na, x)?;
    let gsa = stack_trace(&run_spec.clone().with_attention(true), &gsa_params, na, x)?;
    let out_of = |c: &LayerCache| c.activation.apply(&c.pre_activation);
    let plain_out: Vec<Mat> = plain[..depth].iter().map(out_of).collect();
    let gsa_out: Vec<Mat> = gsa[..depth].iter().map(out_of).collect();

    let e = na.principal_vector();
    let dm = |h: &Mat| subspace_residual(h, &e).frobenius_norm();
    let mut report = OversmoothReport {
        dm_plain: vec![dm(x)],
        dm_gsa: vec![dm(x)],
        s: vec![None],
        s_tilde: vec![None],
        rank_deficient: Vec::new(),
        effective_residual: vec![None],
        lambda,
        gamma,
    };
    for l in 0..depth {
        report.dm_plain.push(dm(&plain_out[l]));
        report.dm_gsa.push(dm(&gsa_out[l]));
        let w = &params[l].w;
        report.s.push(Some(sigma_max(w)?));
        let input = &gsa[l].h_in;
        let mask = &gsa[l]
            .attention
            .as_ref()
            .expect("attention enabled on every traced layer")
            .mask;
        match effective_weight(input, na, mask, gamma, w) {
            Ok(wt) => {
                report.s_tilde.push(Some(sigma_max(&wt)?));
                report
                    .effective_residual
                    .push(Some(effective_weight_residual(input, na, mask, gamma, w, &wt)?));
            }
            Err(Error::Assumption(msg)) => {
                log::debug!("layer {}: {msg}", l + 1);
                report.rank_deficient.push(l + 1);
                report.s_tilde.push(None);
                report.effective_residual.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Outcome of scanning `γ` for the first value at which the attentive stack
/// ends farther from the invariant subspace than the plain one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSweep {
    pub gammas: Vec<f64>,
    pub final_dm_plain: f64,
    pub final_dm_gsa: Vec<f64>,
    /// Smallest swept `γ` with `dm_gsa > dm_plain` at the last layer.
    pub smallest_reversal: Option<f64>,
}

pub fn gamma_sweep(
    spec: &ModelSpec,
    params: &[GsaLayerParams],
    na: &NormalizedAdjacency,
    x: &Mat,
    depth: usize,
    gammas: &[f64],
) -> Result<GammaSweep> {
    let mut sorted = gammas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut final_dm_gsa = Vec::with_capacity(sorted.len());
    let mut final_dm_plain = f64::NAN;
    let mut smallest = None;
    for &g in &sorted {
        let r = oversmooth_trace(spec, params, na, x, depth, g)?;
        let (p, a) = (r.dm_plain[depth], r.dm_gsa[depth]);
        final_dm_plain = p;
        final_dm_gsa.push(a);
        if smallest.is_none() && a > p {
            smallest = Some(g);
        }
    }
    Ok(GammaSweep {
        gammas: sorted,
        final_dm_plain,
        final_dm_gsa,
        smallest_reversal: smallest,
    })
}
