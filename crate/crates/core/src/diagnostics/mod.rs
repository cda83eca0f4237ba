//! Numerical diagnostics: the last-layer loss decomposition, the subspace
//! distance trace for over-smoothing with its effective-weight and lemma
//! checks, and the clique-packing simulation of attention as edge dropping.

mod decomposition;
mod dropedge;
mod lemmas;
mod oversmooth;

pub use decomposition::{
    decompose_model_loss, loss_decomposition, loss_decomposition_with, DecompositionOptions,
    LossDecomposition, MatrixSummary, PairSimilarity,
};
pub use dropedge::{
    dropedge_simulation, edge_influences, exhaustive_sign_sweep, find_monochromatic_clique,
    ramsey_diagonal, regular_graph, CliqueRelation, DropEdgeSimReport, PairSigns, SignSource,
    SignSweep,
};
pub use lemmas::{
    c_hat, check_lemma_pd, check_singular_amplification, lemma_operator, run_lemma_suite,
    sample_b_hat, sample_lemma_problem, AmplificationCheck, LemmaInstanceReport, LemmaOperator,
    LemmaProblem, LemmaSuiteConfig, LemmaSuiteReport, PdCheck, B_HAT_DELTA, SANDWICH_TOL,
};
pub use oversmooth::{
    apply_adjacency_inverse, effective_weight, effective_weight_residual, gamma_sweep,
    oversmooth_trace, subspace_distance, GammaSweep, OversmoothReport, DEFAULT_EPS, RANK_TOL,
};
