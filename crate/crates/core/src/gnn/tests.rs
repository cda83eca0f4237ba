use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::graph::{normalize_adjacency, Graph, NormalizedAdjacency};
use crate::numkernel::{row_softmax, Mat};
use crate::rng;

fn randn(rows: usize, cols: usize, r: &mut rng::Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

fn random_graph(n: usize, p: f64, r: &mut rng::Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

fn random_params(d_in: usize, d_out: usize, d_att: usize, gamma: f64, r: &mut rng::Rng) -> GsaLayerParams {
    GsaLayerParams {
        w: randn(d_in, d_out, r).scale(0.5),
        wl: randn(d_in, d_att, r).scale(0.5),
        wr: randn(d_in, d_att, r).scale(0.5),
        wh: randn(d_in, d_att, r).scale(0.5),
        wg: randn(d_att, d_in, r).scale(0.5),
        gamma,
    }
}

fn assert_close(a: &Mat, b: &Mat, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let diff = a.sub(b).unwrap().max_abs();
    assert!(diff <= tol, "max abs diff {diff} > {tol}\n{a:?}\n{b:?}");
}

#[test]
fn attention_scores_examples() {
    let i2 = Mat::identity(2);
    assert_eq!(attention_scores(&i2, &i2, &i2).unwrap(), i2);
    let h = Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
    assert_eq!(
        attention_scores(&h, &i2, &i2).unwrap(),
        Mat::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    );
    assert!(attention_scores(&h, &i2, &Mat::identity(3)).is_err());
}

#[test]
fn attention_scores_match_pairwise_oracle() {
    let mut r = rng::stream(1, "test/scores");
    let h = randn(4, 3, &mut r);
    let wl = randn(3, 2, &mut r);
    let wr = randn(3, 2, &mut r);
    let s = attention_scores(&h, &wl, &wr).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let mut v = 0.0;
            for a in 0..2 {
                let li: f64 = (0..3).map(|k| h.get(i, k) * wl.get(k, a)).sum();
                let rj: f64 = (0..3).map(|k| h.get(j, k) * wr.get(k, a)).sum();
                v += li * rj;
            }
            assert!((s.get(i, j) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_output_examples() {
    let mut r = rng::stream(2, "test/attn_out");
    let h = randn(3, 4, &mut r);
    let wh = randn(4, 2, &mut r);
    let wg = randn(2, 4, &mut r);
    let o = attention_output(&h, &Mat::identity(3), &wh, &wg).unwrap();
    assert_close(&o, &h.matmul(&wh).unwrap().matmul(&wg).unwrap(), 1e-12);

    let uniform = Mat::filled(3, 3, 1.0 / 3.0);
    let i4 = Mat::identity(4);
    let o = attention_output(&h, &uniform, &i4, &i4).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            let mean = (0..3).map(|k| h.get(k, j)).sum::<f64>() / 3.0;
            assert!((o.get(i, j) - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_output_matches_summation_oracle() {
    let mut r = rng::stream(3, "test/attn_sum");
    let h = randn(5, 4, &mut r);
    let b = row_softmax(&randn(5, 5, &mut r));
    let wh = randn(4, 2, &mut r);
    let wg = randn(2, 4, &mut r);
    let o = attention_output(&h, &b, &wh, &wg).unwrap();
    for i in 0..5 {
        let mut inner = [0.0; 2];
        for j in 0..5 {
            for (a, slot) in inner.iter_mut().enumerate() {
                let hw: f64 = (0..4).map(|k| h.get(j, k) * wh.get(k, a)).sum();
                *slot += b.get(i, j) * hw;
            }
        }
        for c in 0..4 {
            let v: f64 = (0..2).map(|a| inner[a] * wg.get(a, c)).sum();
            assert!((o.get(i, c) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn gcn_layer_examples() {
    let single = normalize_adjacency(&Graph::empty(1));
    let (out, _) = gcn_layer_forward(
        &single,
        &Mat::from_rows(&[[2.0]]),
        &Mat::from_rows(&[[3.0]]),
        Activation::Identity,
    )
    .unwrap();
    assert_eq!(out, Mat::from_rows(&[[6.0]]));

    let (out, cache) = gcn_layer_forward(
        &single,
        &Mat::from_rows(&[[1.0]]),
        &Mat::from_rows(&[[-1.0, 2.0]]),
        Activation::Relu,
    )
    .unwrap();
    assert_eq!(cache.pre_activation, Mat::from_rows(&[[-1.0, 2.0]]));
    assert_eq!(out, Mat::from_rows(&[[0.0, 2.0]]));

    let edge = normalize_adjacency(&Graph::path(2));
    let (out, _) = gcn_layer_forward(&edge, &Mat::identity(2), &Mat::identity(2), Activation::Identity).unwrap();
    assert_eq!(out, edge.mat);
}

#[test]
fn gsa_layer_hand_example() {
    let single = normalize_adjacency(&Graph::empty(1));
    let one = Mat::from_rows(&[[1.0]]);
    let p = GsaLayerParams {
        w: Mat::from_rows(&[[3.0]]),
        wl: one.clone(),
        wr: one.clone(),
        wh: one.clone(),
        wg: one,
        gamma: 0.5,
    };
    let (out, cache) = gsa_layer_forward(&single, &Mat::from_rows(&[[2.0]]), &p, Activation::Identity).unwrap();
    let att = cache.attention.unwrap();
    assert_eq!(att.mask, Mat::from_rows(&[[1.0]]));
    assert_eq!(att.attn_out, Mat::from_rows(&[[2.0]]));
    assert_eq!(out, Mat::from_rows(&[[9.0]]));
}

#[test]
fn uniform_features_attend_to_themselves() {
    let mut r = rng::stream(4, "test/uniform");
    let g = random_graph(6, 0.5, &mut r);
    let na = normalize_adjacency(&g);
    let row = randn(1, 3, &mut r);
    let h = Mat::from_fn(6, 3, |_, j| row.get(0, j));
    let mut p = random_params(3, 2, 3, 0.7, &mut r);
    p.wh = Mat::identity(3);
    p.wg = Mat::identity(3);
    let (out, cache) = gsa_layer_forward(&na, &h, &p, Activation::Relu).unwrap();
    assert_close(&cache.attention.unwrap().attn_out, &h, 1e-12);
    let expected = Activation::Relu.apply(
        &na.mat
            .matmul(&h)
            .unwrap()
            .add(&h.scale(0.7))
            .unwrap()
            .matmul(&p.w)
            .unwrap(),
    );
    assert_close(&out, &expected, 1e-12);
}

#[test]
fn zero_gamma_is_bit_identical_to_gcn() {
    for seed in 0..30 {
        let mut r = rng::indexed_stream(5, "test/gamma0", seed);
        let n = r.random_range(1..9);
        let d = r.random_range(1..7);
        let g = random_graph(n, 0.4, &mut r);
        let na = normalize_adjacency(&g);
        let h = randn(n, d, &mut r);
        let p = random_params(d, 3, 2, 0.0, &mut r);
        for act in [Activation::Relu, Activation::Identity] {
            let (a, _) = gcn_layer_forward(&na, &h, &p.w, act).unwrap();
            let (b, _) = gsa_layer_forward(&na, &h, &p, act).unwrap();
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }
}

/// Loss `⟨r, layer(h)⟩` for finite differences.
fn probe_loss(na: &NormalizedAdjacency, h: &Mat, p: &GsaLayerParams, act: Activation, r: &Mat) -> f64 {
    let (out, _) = gsa_layer_forward(na, h, p, act).unwrap();
    out.dot(r).unwrap()
}

fn grads_agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-8 || diff <= 1e-4 * analytic.abs().max(numeric.abs())
}

struct FdReport {
    checked: usize,
    failures: Vec<String>,
}

fn finite_difference_check(seed: u64) -> FdReport {
    const STEP: f64 = 1e-6;
    let mut r = rng::indexed_stream(11, "test/fd", seed);
    let n = r.random_range(3..=8);
    let d = r.random_range(2..=6);
    let d_out = r.random_range(1..=4);
    let d_att = r.random_range(1..=3);
    let gamma = r.random_range(0.1..1.5);
    let act = if seed % 3 == 0 { Activation::Identity } else { Activation::Relu };
    let g = random_graph(n, 0.4, &mut r);
    let na = normalize_adjacency(&g);
    let h = randn(n, d, &mut r);
    let p = random_params(d, d_out, d_att, gamma, &mut r);
    let probe = randn(n, d_out, &mut r);

    let (_, cache) = gsa_layer_forward(&na, &h, &p, act).unwrap();
    let (gh, grads) = layer_backward(&na, &cache, &p, &probe).unwrap();
    let mut report = FdReport {
        checked: 0,
        failures: Vec::new(),
    };
    let mut check = |name: String, analytic: f64, numeric: f64| {
        report.checked += 1;
        if !grads_agree(analytic, numeric) {
            report.failures.push(format!("{name}: analytic {analytic} numeric {numeric}"));
        }
    };

    for k in 0..5 {
        for idx in 0..p.mats()[k].as_slice().len() {
            let mut plus = p.clone();
            plus.mats_mut()[k].as_mut_slice()[idx] += STEP;
            let mut minus = p.clone();
            minus.mats_mut()[k].as_mut_slice()[idx] -= STEP;
            let numeric = (probe_loss(&na, &h, &plus, act, &probe) - probe_loss(&na, &h, &minus, act, &probe)) / (2.0 * STEP);
            check(format!("seed {seed} param {k}[{idx}]"), grads.mats()[k].as_slice()[idx], numeric);
        }
    }
    let mut plus = p.clone();
    plus.gamma += STEP;
    let mut minus = p.clone();
    minus.gamma -= STEP;
    let numeric = (probe_loss(&na, &h, &plus, act, &probe) - probe_loss(&na, &h, &minus, act, &probe)) / (2.0 * STEP);
    check(format!("seed {seed} gamma"), grads.gamma, numeric);
    for idx in 0..h.as_slice().len() {
        let mut hp = h.clone();
        hp.as_mut_slice()[idx] += STEP;
        let mut hm = h.clone();
        hm.as_mut_slice()[idx] -= STEP;
        let numeric = (probe_loss(&na, &hp, &p, act, &probe) - probe_loss(&na, &hm, &p, act, &probe)) / (2.0 * STEP);
        check(format!("seed {seed} h[{idx}]"), gh.as_slice()[idx], numeric);
    }
    report
}

#[test]
fn layer_gradients_match_finite_differences() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for seed in 0..50 {
        let rep = finite_difference_check(seed);
        checked += rep.checked;
        failures.extend(rep.failures);
    }
    assert!(checked > 1000);
    assert!(failures.is_empty(), "{} mismatches: {:#?}", failures.len(), &failures[..failures.len().min(10)]);
}

#[test]
fn zero_cotangent_gives_zero_gradients() {
    let mut r = rng::stream(6, "test/zero_cot");
    let na = normalize_adjacency(&random_graph(5, 0.5, &mut r));
    let h = randn(5, 4, &mut r);
    let p = random_params(4, 3, 2, 0.8, &mut r);
    let (_, cache) = gsa_layer_forward(&na, &h, &p, Activation::Relu).unwrap();
    let (gh, grads) = layer_backward(&na, &cache, &p, &Mat::zeros(5, 3)).unwrap();
    assert_eq!(gh.max_abs(), 0.0);
    for m in grads.mats() {
        assert_eq!(m.max_abs(), 0.0);
    }
    assert_eq!(grads.gamma, 0.0);
}

#[test]
fn zero_gamma_gradients() {
    let mut r = rng::stream(7, "test/gamma0_grad");
    let na = normalize_adjacency(&random_graph(5, 0.5, &mut r));
    let h = randn(5, 4, &mut r);
    let p = random_params(4, 3, 2, 0.0, &mut r);
    let probe = randn(5, 3, &mut r);
    let act = Activation::Identity;
    let (_, cache) = gsa_layer_forward(&na, &h, &p, act).unwrap();
    let (_, grads) = layer_backward(&na, &cache, &p, &probe).unwrap();
    for m in &grads.mats()[1..] {
        assert_eq!(m.max_abs(), 0.0);
    }
    // the loss is linear in gamma under an identity activation, so a
    // one-sided difference is exact up to rounding
    let step = 1e-6;
    let mut plus = p.clone();
    plus.gamma = step;
    let numeric = (probe_loss(&na, &h, &plus, act, &probe) - probe_loss(&na, &h, &p, act, &probe)) / step;
    assert!(grads.gamma.abs() > 1e-6);
    assert!(grads_agree(grads.gamma, numeric), "{} vs {numeric}", grads.gamma);
}

#[test]
fn mismatched_cache_is_rejected() {
    let mut r = rng::stream(8, "test/mismatch");
    let na = normalize_adjacency(&random_graph(4, 0.5, &mut r));
    let h = randn(4, 3, &mut r);
    let p = random_params(3, 2, 1, 0.3, &mut r);
    let (_, cache) = gsa_layer_forward(&na, &h, &p, Activation::Relu).unwrap();
    let other = random_params(3, 5, 1, 0.3, &mut r);
    assert!(layer_backward(&na, &cache, &other, &Mat::zeros(4, 2)).is_err());
    let mut regamma = p.clone();
    regamma.gamma = 0.9;
    assert!(layer_backward(&na, &cache, &regamma, &Mat::zeros(4, 2)).is_err());
}

#[test]
fn sum_pool_examples() {
    let h = Mat::from_rows(&[[1.5, -2.0]]);
    assert_eq!(sum_pool_readout(&h, &[1]).unwrap(), h);
    assert_eq!(
        sum_pool_readout(&Mat::identity(3), &[2, 1]).unwrap(),
        Mat::from_rows(&[[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    );
    assert!(sum_pool_readout(&Mat::identity(3), &[1, 1]).is_err());

    let mut r = rng::stream(9, "test/pool");
    let sizes = [3, 1, 4, 2];
    let h = randn(10, 3, &mut r);
    let pooled = sum_pool_readout(&h, &sizes).unwrap();
    let mut start = 0;
    for (g, &len) in sizes.iter().enumerate() {
        for c in 0..3 {
            let s: f64 = (start..start + len).map(|i| h.get(i, c)).sum();
            assert!((pooled.get(g, c) - s).abs() < 1e-12);
        }
        start += len;
    }
    // adjoint identity ⟨pool(h), g⟩ = ⟨h, poolᵀ(g)⟩
    let gr = randn(4, 3, &mut r);
    let lhs = pooled.dot(&gr).unwrap();
    let rhs = h.dot(&sum_pool_backward(&gr, &sizes).unwrap()).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
}

fn fixture() -> (NormalizedAdjacency, Mat) {
    let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
    let mut r = rng::stream(12, "test/fixture");
    (normalize_adjacency(&g), randn(5, 6, &mut r))
}

#[test]
fn model_without_attention_composes_gcn_layers() {
    let (na, x) = fixture();
    let mut spec = ModelSpec::two_layer(6, 3, false);
    spec.dropout = 0.0;
    let params = init_params(&spec, 3).unwrap();
    let (logits, _) = model_forward(&spec, &params, &na, &x, &AttentionScope::Global, None).unwrap();
    let (h1, _) = gcn_layer_forward(&na, &x, &params[0].w, Activation::Relu).unwrap();
    let (h2, _) = gcn_layer_forward(&na, &h1, &params[1].w, Activation::Identity).unwrap();
    assert_eq!(logits, h2);
}

#[test]
fn model_forward_is_deterministic() {
    let (na, x) = fixture();
    let spec = ModelSpec::two_layer(6, 3, true);
    let mut params = init_params(&spec, 4).unwrap();
    params[0].gamma = 0.3;
    let run = || {
        let mut dr = rng::indexed_stream(9, rng::DROPOUT, 0);
        model_forward(&spec, &params, &na, &x, &AttentionScope::Global, Some(&mut dr)).unwrap().0
    };
    assert_eq!(run().as_slice(), run().as_slice());
}

#[test]
fn model_matches_straight_line_evaluation() {
    let (na, x) = fixture();
    let mut spec = ModelSpec::two_layer(6, 3, true);
    spec.dropout = 0.0;
    let mut params = init_params(&spec, 5).unwrap();
    params[0].gamma = 0.4;
    params[1].gamma = 0.25;
    let (logits, _) = model_forward(&spec, &params, &na, &x, &AttentionScope::Global, None).unwrap();

    // plain loops, no shared helpers beyond the softmax definition
    fn mm(a: &[Vec<f64>], b: &Mat) -> Vec<Vec<f64>> {
        a.iter()
            .map(|row| (0..b.cols()).map(|j| (0..b.rows()).map(|k| row[k] * b.get(k, j)).sum()).collect())
            .collect()
    }
    fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    }
    fn layer(a: &Mat, h: &[Vec<f64>], p: &GsaLayerParams, relu: bool) -> Vec<Vec<f64>> {
        let n = h.len();
        let pl = mm(h, &p.wl);
        let pr = mm(h, &p.wr);
        let ph = mm(h, &p.wh);
        let mut out_mixed = vec![vec![0.0; h[0].len()]; n];
        for i in 0..n {
            let s: Vec<f64> = (0..n).map(|j| pl[i].iter().zip(&pr[j]).map(|(x, y)| x * y).sum()).collect();
            let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut att = vec![0.0; ph[0].len()];
            for j in 0..n {
                for (a_, v) in att.iter_mut().zip(&ph[j]) {
                    *a_ += e[j] / z * v;
                }
            }
            for c in 0..h[0].len() {
                let o: f64 = (0..att.len()).map(|k| att[k] * p.wg.get(k, c)).sum();
                let agg: f64 = (0..n).map(|j| a.get(i, j) * h[j][c]).sum();
                out_mixed[i][c] = agg + p.gamma * o;
            }
        }
        let z = mm(&out_mixed, &p.w);
        z.into_iter()
            .map(|r| r.into_iter().map(|v| if relu { v.max(0.0) } else { v }).collect())
            .collect()
    }
    let h1 = layer(&na.mat, &to_rows(&x), &params[0], true);
    let h2 = layer(&na.mat, &h1, &params[1], false);
    for i in 0..5 {
        for j in 0..3 {
            assert!((logits.get(i, j) - h2[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    let (na, x) = fixture();
    let mut spec = ModelSpec::stack(6, 4, 3, 3, true);
    spec.activation = Activation::Relu;
    spec.dropout = 0.3;
    let mut params = init_params(&spec, 6).unwrap();
    for (l, p) in params.iter_mut().enumerate() {
        p.gamma = 0.2 + 0.1 * l as f64;
    }
    let mut r = rng::stream(13, "test/model_fd");
    let probe = randn(5, 3, &mut r);
    let loss = |ps: &[GsaLayerParams]| {
        let mut dr = rng::indexed_stream(1, rng::DROPOUT, 7);
        let (out, _) = model_forward(&spec, ps, &na, &x, &AttentionScope::Global, Some(&mut dr)).unwrap();
        out.dot(&probe).unwrap()
    };
    let mut dr = rng::indexed_stream(1, rng::DROPOUT, 7);
    let (_, cache) = model_forward(&spec, &params, &na, &x, &AttentionScope::Global, Some(&mut dr)).unwrap();
    let grads = model_backward(&spec, &params, &na, &cache, &probe).unwrap();
    let step = 1e-6;
    for l in 0..params.len() {
        for k in 0..5 {
            for idx in 0..params[l].mats()[k].as_slice().len() {
                let mut plus = params.clone();
                plus[l].mats_mut()[k].as_mut_slice()[idx] += step;
                let mut minus = params.clone();
                minus[l].mats_mut()[k].as_mut_slice()[idx] -= step;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let analytic = grads[l].mats()[k].as_slice()[idx];
                assert!(grads_agree(analytic, numeric), "layer {l} param {k}[{idx}]: {analytic} vs {numeric}");
            }
        }
        let mut plus = params.clone();
        plus[l].gamma += step;
        let mut minus = params.clone();
        minus[l].gamma -= step;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
        assert!(grads_agree(grads[l].gamma, numeric));
    }
}

#[test]
fn attention_mixes_across_disconnected_nodes() {
    let na = normalize_adjacency(&Graph::empty(4));
    let mut r = rng::stream(14, "test/bypass");
    let h = randn(4, 3, &mut r);
    let p = random_params(3, 2, 2, 0.6, &mut r);
    let (out, cache) = gsa_layer_forward(&na, &h, &p, Activation::Identity).unwrap();
    assert!(cache.attention.as_ref().unwrap().mask.get(0, 2) > 0.0);
    let mut h2 = h.clone();
    h2.set(2, 0, h2.get(2, 0) + 0.5);
    let (out2, _) = gsa_layer_forward(&na, &h2, &p, Activation::Identity).unwrap();
    assert!((out.get(0, 0) - out2.get(0, 0)).abs() > 1e-9);
    let mut p0 = p.clone();
    p0.gamma = 0.0;
    let (a, _) = gsa_layer_forward(&na, &h, &p0, Activation::Identity).unwrap();
    let (b, _) = gsa_layer_forward(&na, &h2, &p0, Activation::Identity).unwrap();
    assert_eq!(a.row(0), b.row(0));
}

#[test]
fn segmented_attention_never_crosses_segments() {
    let mut r = rng::stream(15, "test/segments");
    let g1 = random_graph(3, 0.7, &mut r);
    let g2 = random_graph(4, 0.7, &mut r);
    let na = NormalizedAdjacency::block_diagonal(&[&normalize_adjacency(&g1), &normalize_adjacency(&g2)]);
    let h = randn(7, 3, &mut r);
    let p = random_params(3, 2, 2, 0.9, &mut r);
    let scope = AttentionScope::Segments(vec![3, 4]);
    let (out, cache) = gsa_layer_forward_scoped(&na, &h, &p, Activation::Relu, &scope).unwrap();
    let mask = cache.attention.unwrap().mask;
    for i in 0..7 {
        for j in 0..7 {
            if (i < 3) != (j < 3) {
                assert_eq!(mask.get(i, j), 0.0);
            }
        }
        assert!((mask.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let mut h2 = h.clone();
    for j in 0..3 {
        h2.set(5, j, 10.0);
    }
    let (out2, _) = gsa_layer_forward_scoped(&na, &h2, &p, Activation::Relu, &scope).unwrap();
    assert_eq!(out.slice_rows(0, 3), out2.slice_rows(0, 3));
    assert!(gsa_layer_forward_scoped(&na, &h, &p, Activation::Relu, &AttentionScope::Segments(vec![3, 3])).is_err());
}

#[test]
fn init_shares_conv_weights_across_attention_flags() {
    let a = init_params(&ModelSpec::two_layer(10, 3, true), 1).unwrap();
    let b = init_params(&ModelSpec::two_layer(10, 3, false), 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].d_att(), 1);
    assert!(a.iter().all(|p| p.gamma == 0.0));
    let limit = (6.0f64 / 26.0).sqrt();
    assert!(a[0].w.as_slice().iter().all(|v| v.abs() <= limit));
    assert_eq!(attention_dim(1433, 8), 179);
    assert_eq!(attention_dim(5, 8), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_zero_gamma_equivalence(seed in any::<u64>(), n in 1usize..9, d in 1usize..6) {
        let mut r = rng::stream(seed, "prop/gamma0");
        let na = normalize_adjacency(&random_graph(n, 0.5, &mut r));
        let h = randn(n, d, &mut r).scale(10.0);
        let p = random_params(d, 2, 2, 0.0, &mut r);
        let (a, _) = gcn_layer_forward(&na, &h, &p.w, Activation::Relu).unwrap();
        let (b, _) = gsa_layer_forward(&na, &h, &p, Activation::Relu).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn prop_masks_are_row_stochastic(seed in any::<u64>(), n in 1usize..10, scale in 0.1f64..100.0) {
        let mut r = rng::stream(seed, "prop/mask");
        let na = normalize_adjacency(&random_graph(n, 0.5, &mut r));
        let h = randn(n, 4, &mut r).scale(scale);
        let p = random_params(4, 2, 2, 0.5, &mut r);
        let (_, cache) = gsa_layer_forward(&na, &h, &p, Activation::Relu).unwrap();
        let mask = cache.attention.unwrap().mask;
        for i in 0..n {
            prop_assert!((mask.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn prop_permutation_equivariance(seed in any::<u64>(), n in 2usize..8) {
        let mut r = rng::stream(seed, "prop/perm");
        let g = random_graph(n, 0.5, &mut r);
        let h = randn(n, 3, &mut r);
        let p = random_params(3, 2, 2, 0.7, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        // node i of the permuted graph is node perm[i] of the original
        let mut inv = vec![0; n];
        for (i, &v) in perm.iter().enumerate() {
            inv[v] = i;
        }
        let pg = Graph::new(n, g.edges().iter().map(|&(a, b)| (inv[a], inv[b]))).unwrap();
        let ph = h.select_rows(&perm);
        let (out, _) = gsa_layer_forward(&normalize_adjacency(&g), &h, &p, Activation::Relu).unwrap();
        let (pout, _) = gsa_layer_forward(&normalize_adjacency(&pg), &ph, &p, Activation::Relu).unwrap();
        let diff = pout.sub(&out.select_rows(&perm)).unwrap().max_abs();
        prop_assert!(diff <= 1e-12);
    }
}
