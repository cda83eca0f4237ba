use crate::error::{shape_err, Result};
use crate::gnn::{GsaLayerParams, LayerGrads};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[GsaLayerParams]) -> Self {
        let zeros: Vec<LayerGrads> = params.iter().map(GsaLayerParams::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Which parameters of a layer a step may change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trainable {
    /// Update `wl`, `wr`, `wh`, `wg`.
    pub attention: bool,
    /// Update `gamma`.
    pub gamma: bool,
    /// Add the L2 term to this layer's matrix gradients.
    pub decay: bool,
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, wd: f64, c1: f64, c2: f64) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = g + wd * *p;
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let mh = *m / c1;
        let vh = *v / c2;
        *p -= lr * mh / (vh.sqrt() + EPSILON);
    }
}

/// One Adam step with bias correction. The L2 term `weight_decay·p` is added
/// to the gradient of every decayed matrix before the moment update; `gamma`
/// is never decayed and is clamped to `[0, ∞)` afterwards.
pub fn adam_step(
    params: &mut [GsaLayerParams],
    grads: &[LayerGrads],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
    trainable: &[Trainable],
) -> Result<()> {
    if grads.len() != params.len() || trainable.len() != params.len() || state.m.len() != params.len() {
        return Err(shape_err(
            "adam_step",
            format!(
                "{} params, {} grads, {} flags, {} states",
                params.len(),
                grads.len(),
                trainable.len(),
                state.m.len()
            ),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        for (a, b) in p.mats().iter().zip(g.mats()) {
            if a.shape() != b.shape() {
                return Err(shape_err(
                    "adam_step",
                    format!("param {:?} vs grad {:?}", a.shape(), b.shape()),
                ));
            }
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (l, p) in params.iter_mut().enumerate() {
        let tr = trainable[l];
        let wd = if tr.decay { weight_decay } else { 0.0 };
        let g = &grads[l];
        let (ms, vs) = (&mut state.m[l], &mut state.v[l]);
        let count = if tr.attention { 5 } else { 1 };
        let gm = g.mats();
        let pm = p.mats_mut();
        let mm = ms.mats_mut();
        let vm = vs.mats_mut();
        for k in 0..count {
            update(
                pm[k].as_mut_slice(),
                gm[k].as_slice(),
                mm[k].as_mut_slice(),
                vm[k].as_mut_slice(),
                lr,
                wd,
                c1,
                c2,
            );
        }
        if tr.gamma {
            let mut gamma = [p.gamma];
            update(
                &mut gamma,
                &[g.gamma],
                std::slice::from_mut(&mut ms.gamma),
                std::slice::from_mut(&mut vs.gamma),
                lr,
                0.0,
                c1,
                c2,
            );
            p.gamma = gamma[0].max(0.0);
        }
    }
    Ok(())
}
