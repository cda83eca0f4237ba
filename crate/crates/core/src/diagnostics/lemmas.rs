use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::oversmooth::{check_full_column_rank, sigma_max, DEFAULT_EPS};
use crate::error::{shape_err, Error, Result};
use crate::graph::{shifted_laplacian, Graph};
use crate::numkernel::{sym_eig_extreme, sym_eigen, Cholesky, Mat};
use crate::rng;

/// Ridge added to the sampled gram matrix.
pub const B_HAT_DELTA: f64 = 1e-3;

/// `GᵀG + δI` with `G` an `n × n` standard normal matrix drawn from `seed`.
pub fn sample_b_hat(n: usize, seed: u64) -> Mat {
    let mut r = rng::stream(seed, "diagnostics/b_hat");
    let g = Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
    let mut b = g.t_matmul(&g).expect("square");
    for i in 0..n {
        b.set(i, i, b.get(i, i) + B_HAT_DELTA);
    }
    b
}

/// Symmetric positive definite stand-in for `Ã′⁻¹ B̂`: with `Ã′ = L Lᵀ`,
/// returns `L⁻¹ B̂ L⁻ᵀ`, which is similar to `Ã′⁻¹ B̂` (same spectrum) and
/// symmetric.
pub fn c_hat(g: &Graph, eps: f64, b_hat: &Mat) -> Result<Mat> {
    let shifted = shifted_laplacian(g, eps)?;
    let chol = Cholesky::new(&shifted).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::Assumption(format!(
            "shifted adjacency is not positive definite (pivot {pivot})"
        )),
        other => other,
    })?;
    let left = chol.solve_lower(b_hat)?;
    let c = chol.solve_lower(&left.transpose())?;
    Ok(symmetrize(&c))
}

fn symmetrize(m: &Mat) -> Mat {
    Mat::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
}

/// `P = I + γ (HᵀH)⁻¹ Hᵀ Ĉ H` with its spectral data.
#[derive(Clone, Debug)]
pub struct LemmaOperator {
    pub p: Mat,
    /// Eigenvalues of `P` (real: `P` is similar to a symmetric matrix).
    pub eigenvalues: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn lemma_operator(h: &Mat, g: &Graph, eps: f64, gamma: f64, seed: u64) -> Result<LemmaOperator> {
    if h.rows() != g.n() {
        return Err(shape_err(
            "lemma_operator",
            format!("h has {} rows, graph has {} nodes", h.rows(), g.n()),
        ));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Param(format!("gamma must be finite and ≥ 0, got {gamma}")));
    }
    check_full_column_rank(h)?;
    let c = c_hat(g, eps, &sample_b_hat(g.n(), seed))?;
    let m = symmetrize(&h.t_matmul(&c.matmul(h)?)?);
    let gram = Cholesky::new(&h.t_matmul(h)?)?;

    let mut p = Mat::identity(h.cols());
    p.add_scaled(gamma, &gram.solve(&m)?)?;

    // spectrum of (HᵀH)⁻¹M equals that of Ls⁻¹ M Ls⁻ᵀ
    let half = gram.solve_lower(&m)?;
    let sym = symmetrize(&gram.solve_lower(&half.transpose())?);
    let (q_eigs, _) = sym_eigen(&sym)?;
    let eigenvalues = q_eigs.iter().map(|&q| 1.0 + gamma * q).collect();

    let (lo, hi) = sym_eig_extreme(&p.t_matmul(&p)?)?;
    Ok(LemmaOperator {
        p,
        eigenvalues,
        sigma_min: lo.max(0.0).sqrt(),
        sigma_max: hi.max(0.0).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdCheck {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `λ_min(P) > 1`
    pub pass: bool,
    /// `γ = 0`, where `P = I` and the strict inequality cannot hold.
    pub boundary: bool,
}

pub fn check_lemma_pd(h: &Mat, g: &Graph, eps: f64, gamma: f64, seed: u64) -> Result<PdCheck> {
    let op = lemma_operator(h, g, eps, gamma, seed)?;
    let lambda_min = op.eigenvalues.first().copied().unwrap_or(f64::NAN);
    let lambda_max = op.eigenvalues.last().copied().unwrap_or(f64::NAN);
    Ok(PdCheck {
        lambda_min,
        lambda_max,
        sigma_min: op.sigma_min,
        sigma_max: op.sigma_max,
        pass: lambda_min > 1.0,
        boundary: gamma == 0.0,
    })
}

/// Relative slack allowed in the singular-value sandwich for rounding.
pub const SANDWICH_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationCheck {
    /// `σ_max(w)`
    pub s: f64,
    /// `σ_max(P w)`
    pub s_tilde: f64,
    pub sigma_min_p: f64,
    pub sigma_max_p: f64,
    /// `s̃ > s`
    pub pass: bool,
    /// `σ_min(P)·s ≤ s̃ ≤ σ_max(P)·s`
    pub sandwich: bool,
    pub boundary: bool,
}

pub fn check_singular_amplification(
    h: &Mat,
    g: &Graph,
    eps: f64,
    gamma: f64,
    w: &Mat,
    seed: u64,
) -> Result<AmplificationCheck> {
    if w.rows() != h.cols() {
        return Err(shape_err(
            "check_singular_amplification",
            format!("w {:?} for h {:?}", w.shape(), h.shape()),
        ));
    }
    let op = lemma_operator(h, g, eps, gamma, seed)?;
    let s = sigma_max(w)?;
    let s_tilde = sigma_max(&op.p.matmul(w)?)?;
    let lo = op.sigma_min * s * (1.0 - SANDWICH_TOL);
    let hi = op.sigma_max * s * (1.0 + SANDWICH_TOL);
    Ok(AmplificationCheck {
        s,
        s_tilde,
        sigma_min_p: op.sigma_min,
        sigma_max_p: op.sigma_max,
        pass: s_tilde > s,
        sandwich: lo <= s_tilde && s_tilde <= hi,
        boundary: gamma == 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSuiteConfig {
    pub n_instances: usize,
    pub gamma: f64,
    pub eps: f64,
    pub seed: u64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_prob: f64,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self {
            n_instances: 100,
            gamma: 0.5,
            eps: DEFAULT_EPS,
            seed: 0,
            min_nodes: 4,
            max_nodes: 12,
            edge_prob: 0.4,
        }
    }
}

impl LemmaSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::Param(format!(
                "node range {}..={} is empty",
                self.min_nodes, self.max_nodes
            )));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Param(format!("edge_prob {} outside [0, 1]", self.edge_prob)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Param(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Param(format!("gamma must be finite and ≥ 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// One sampled problem: a random graph, a standard normal `h` with at most
/// as many columns as rows, a weight `w`, and the seed for `B̂`.
#[derive(Clone, Debug)]
pub struct LemmaProblem {
    pub graph: Graph,
    pub h: Mat,
    pub w: Mat,
    pub b_seed: u64,
}

pub fn sample_lemma_problem(cfg: &LemmaSuiteConfig, index: u64) -> LemmaProblem {
    let mut r = rng::indexed_stream(cfg.seed, "diagnostics/lemma", index);
    let n = r.random_range(cfg.min_nodes..=cfg.max_nodes);
    let cols = r.random_range(1..=n);
    let out = r.random_range(1..=cols.max(2));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < cfg.edge_prob {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, edges).expect("pairs are in range");
    let h = Mat::from_fn(n, cols, |_, _| StandardNormal.sample(&mut r));
    let w = Mat::from_fn(cols, out, |_, _| StandardNormal.sample(&mut r));
    LemmaProblem {
        graph,
        h,
        w,
        b_seed: r.random(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaInstanceReport {
    pub index: u64,
    pub n: usize,
    pub cols: usize,
    pub pd: PdCheck,
    pub amplification: AmplificationCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteReport {
    pub config: LemmaSuiteConfig,
    pub instances: Vec<LemmaInstanceReport>,
    /// Instances whose `h` violated the full-rank assumption and were skipped.
    pub skipped: Vec<u64>,
    pub pd_pass: usize,
    pub amp_pass: usize,
    pub sandwich_pass: usize,
}

impl LemmaSuiteReport {
    pub fn evaluated(&self) -> usize {
        self.instances.len()
    }

    pub fn all_pass(&self) -> bool {
        let n = self.evaluated();
        self.pd_pass == n && self.amp_pass == n && self.sandwich_pass == n
    }

    pub fn boundary(&self) -> bool {
        self.config.gamma == 0.0
    }
}

/// Runs both checks on `n_instances` sampled problems. Problems that violate
/// the rank assumption are listed in `skipped` and replaced by further
/// samples, so the report always covers `n_instances` valid problems.
pub fn run_lemma_suite(cfg: &LemmaSuiteConfig) -> Result<LemmaSuiteReport> {
    cfg.validate()?;
    let mut instances = Vec::with_capacity(cfg.n_instances);
    let mut skipped = Vec::new();
    let mut index = 0u64;
    while instances.len() < cfg.n_instances {
        let prob = sample_lemma_problem(cfg, index);
        let pd = check_lemma_pd(&prob.h, &prob.graph, cfg.eps, cfg.gamma, prob.b_seed);
        let amp = check_singular_amplification(&prob.h, &prob.graph, cfg.eps, cfg.gamma, &prob.w, prob.b_seed);
        match (pd, amp) {
            (Ok(pd), Ok(amplification)) => instances.push(LemmaInstanceReport {
                index,
                n: prob.graph.n(),
                cols: prob.h.cols(),
                pd,
                amplification,
            }),
            (Err(Error::Assumption(msg)), _) | (_, Err(Error::Assumption(msg))) => {
                log::warn!("lemma instance {index} skipped: {msg}");
                skipped.push(index);
                if skipped.len() > cfg.n_instances.max(100) {
                    return Err(Error::Assumption(format!(
                        "{} sampled problems violated the assumptions",
                        skipped.len()
                    )));
                }
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
        index += 1;
    }
    let count = |f: &dyn Fn(&LemmaInstanceReport) -> bool| instances.iter().filter(|i| f(i)).count();
    Ok(LemmaSuiteReport {
        config: *cfg,
        pd_pass: count(&|i| i.pd.pass),
        amp_pass: count(&|i| i.amplification.pass),
        sandwich_pass: count(&|i| i.amplification.sandwich),
        instances,
        skipped,
    })
}
