//! Undirected simple graphs and the adjacency-derived operators used by the
//! layers and diagnostics.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{dot, norm2, Mat};
use crate::rng;

/// Undirected simple graph. Edges are stored once as `(i, j)` with `i < j`,
/// sorted, so iteration order is deterministic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicate pairs (in either
    /// orientation) are merged; self-loops and out-of-range ids are errors.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Input(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::Input(format!("self-loop on node {a}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self { n, edges: list })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        Self { n, edges }
    }

    pub fn path(n: usize) -> Self {
        Self {
            n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::path(n);
        if n >= 3 {
            g.edges.push((0, n - 1));
            g.edges.sort_unstable();
        }
        g
    }

    pub fn star(n: usize) -> Self {
        Self {
            n,
            edges: (1..n).map(|j| (0, j)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Dense 0/1 adjacency matrix with zero diagonal.
    pub fn adjacency(&self) -> Mat {
        let mut a = Mat::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(&self.neighbors())
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().len() == 1
    }

    /// Subgraph induced by `nodes`; node `nodes[k]` becomes node `k`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let (ia, ib) = (index[a], index[b]);
                (ia != usize::MAX && ib != usize::MAX).then(|| (ia.min(ib), ia.max(ib)))
            })
            .collect();
        edges.sort_unstable();
        Graph {
            n: nodes.len(),
            edges,
        }
    }

    /// Largest connected component (ties broken by smallest member) and the
    /// original ids of its nodes.
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let comps = self.components();
        let best = comps
            .into_iter()
            .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best });
        (self.induced_subgraph(&best), best)
    }

    /// Disjoint union; node ids of `other` are shifted by `self.n()`.
    pub fn disjoint_union(graphs: &[&Graph]) -> Graph {
        let mut n = 0;
        let mut edges = Vec::new();
        for g in graphs {
            edges.extend(g.edges.iter().map(|&(a, b)| (a + n, b + n)));
            n += g.n;
        }
        Graph { n, edges }
    }

    /// Writes the edge-list text format: a `# nodes <n>` header followed by
    /// one `i<TAB>j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# nodes {}", self.n);
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "{a}\t{b}");
        }
        s
    }

    /// Parses the edge-list format. Blank lines and `#` comments are skipped;
    /// a `# nodes <n>` comment fixes the node count, otherwise it is one more
    /// than the largest id seen.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut declared: Option<usize> = None;
        let mut pairs = Vec::new();
        let mut max_id: Option<usize> = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(count) = rest.trim().strip_prefix("nodes") {
                    let n = count.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: ln + 1,
                        msg: format!("bad node count: {e}"),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "expected two tab-separated node ids".into(),
                });
            };
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad node id {s:?}: {e}"),
                })
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a == b {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("self-loop on node {a}"),
                });
            }
            max_id = Some(max_id.map_or(a.max(b), |m: usize| m.max(a).max(b)));
            pairs.push((a, b));
        }
        let n = match (declared, max_id) {
            (Some(n), Some(m)) if m >= n => {
                return Err(Error::Format(format!(
                    "node id {m} exceeds declared node count {n}"
                )))
            }
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        Graph::new(n, pairs)
    }
}

fn components_of(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `D^{-1/2} (A + I) D^{-1/2}` with the self-looped degrees it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    pub mat: Mat,
    pub degrees: Vec<usize>,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Unit vector `D^{1/2} 1 / ‖D^{1/2} 1‖`, the eigenvector of eigenvalue 1.
    pub fn principal_vector(&self) -> Vec<f64> {
        let v: Vec<f64> = self.degrees.iter().map(|&d| (d as f64).sqrt()).collect();
        let nv = norm2(&v);
        v.into_iter().map(|x| x / nv).collect()
    }

    /// Connected components read off the nonzero pattern of the matrix.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                self.mat
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, &v)| j != i && v != 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        components_of(&adj)
    }

    /// Block-diagonal operator for a batch of graphs.
    pub fn block_diagonal(blocks: &[&NormalizedAdjacency]) -> NormalizedAdjacency {
        let n: usize = blocks.iter().map(|b| b.n()).sum();
        let mut mat = Mat::zeros(n, n);
        let mut degrees = Vec::with_capacity(n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n() {
                for j in 0..b.n() {
                    mat.set(off + i, off + j, b.mat.get(i, j));
                }
            }
            degrees.extend_from_slice(&b.degrees);
            off += b.n();
        }
        NormalizedAdjacency { mat, degrees }
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let degrees: Vec<usize> = g.degrees().into_iter().map(|d| d + 1).collect();
    let n = g.n();
    let mut mat = Mat::zeros(n, n);
    for i in 0..n {
        mat.set(i, i, 1.0 / degrees[i] as f64);
    }
    for &(i, j) in g.edges() {
        let v = 1.0 / ((degrees[i] * degrees[j]) as f64).sqrt();
        mat.set(i, j, v);
        mat.set(j, i, v);
    }
    NormalizedAdjacency { mat, degrees }
}

/// How the diagonal of the complement adjacency is filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplementDiagonal {
    /// `A_ii = 0`, so the complement has ones on the diagonal.
    #[default]
    Include,
    /// Only off-diagonal non-edges are marked.
    Exclude,
}

/// Indicator of node pairs without an edge.
pub fn complement_adjacency(g: &Graph, diagonal: ComplementDiagonal) -> Mat {
    let n = g.n();
    let mut c = Mat::filled(n, n, 1.0);
    for &(i, j) in g.edges() {
        c.set(i, j, 0.0);
        c.set(j, i, 0.0);
    }
    if diagonal == ComplementDiagonal::Exclude {
        for i in 0..n {
            c.set(i, i, 0.0);
        }
    }
    c
}

/// `(1 + ε) I + D^{-1/2} A D^{-1/2}`, with `D` the self-looped degrees.
///
/// The off-diagonal part is a congruence of `D_0^{-1/2} A D_0^{-1/2}` (plain
/// degrees, spectrum in `[-1, 1]`) by a diagonal contraction, so its spectral
/// radius is below 1 and the matrix is positive definite for every `ε > 0`.
pub fn shifted_laplacian(g: &Graph, eps: f64) -> Result<Mat> {
    shifted_from_normalized(&normalize_adjacency(g), eps)
}

/// [`shifted_laplacian`] built from an already normalized adjacency.
pub fn shifted_from_normalized(na: &NormalizedAdjacency, eps: f64) -> Result<Mat> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Param(format!("eps must be positive, got {eps}")));
    }
    let mut m = na.mat.clone();
    for i in 0..na.n() {
        m.set(i, i, 1.0 + eps);
    }
    Ok(m)
}

pub const SPECTRAL_GAP_TOL: f64 = 1e-14;
pub const SPECTRAL_GAP_MAX_ITERS: usize = 200_000;

/// Largest eigenvalue magnitude of `Ã` after removing the principal
/// eigenvalue 1, by power iteration on the operator deflated against
/// `e = D^{1/2} 1`.
pub fn spectral_gap(na: &NormalizedAdjacency) -> Result<f64> {
    spectral_gap_with(na, SPECTRAL_GAP_TOL, SPECTRAL_GAP_MAX_ITERS)
}

pub fn spectral_gap_with(na: &NormalizedAdjacency, tol: f64, max_iters: usize) -> Result<f64> {
    let comps = na.components();
    if comps.len() != 1 {
        return Err(Error::Disconnected {
            components: comps.len(),
        });
    }
    let n = na.n();
    if n == 1 {
        return Ok(0.0);
    }
    let e = na.principal_vector();
    let deflate = |v: &mut Vec<f64>| {
        let c = dot(v, &e);
        v.iter_mut().zip(&e).for_each(|(x, ei)| *x -= c * ei);
    };
    let mut r = rng::stream(0x9a9_5eed, "graph/spectral_gap");
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    deflate(&mut v);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    let mut mu = 0.0;
    for _ in 0..max_iters {
        let mut w: Vec<f64> = (0..n).map(|i| dot(na.mat.row(i), &v)).collect();
        deflate(&mut w);
        mu = norm2(&w);
        if mu <= f64::EPSILON * 1e-3 {
            return Ok(mu);
        }
        w.iter_mut().for_each(|x| *x /= mu);
        v = w;
        if (mu - prev).abs() <= tol * mu {
            break;
        }
        prev = mu;
    }
    Ok(mu)
}
