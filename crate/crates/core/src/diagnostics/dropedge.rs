use std::collections::HashSet;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Exact diagonal Ramsey numbers `R(s, s)` for the clique sizes simulated.
pub fn ramsey_diagonal(s: usize) -> Option<usize> {
    match s {
        1 => Some(1),
        2 => Some(2),
        3 => Some(6),
        4 => Some(18),
        _ => None,
    }
}

/// A ±1 colouring of the pairs of `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSigns {
    n: usize,
    upper: Vec<i8>,
}

impl PairSigns {
    fn index(n: usize, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * n - a - 1) / 2 + (b - a - 1)
    }

    pub fn pairs(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut upper = Vec::with_capacity(Self::pairs(n));
        for i in 0..n {
            for j in (i + 1)..n {
                upper.push(if f(i, j) { 1 } else { -1 });
            }
        }
        Self { n, upper }
    }

    pub fn uniform(n: usize, positive: bool) -> Self {
        Self::from_fn(n, |_, _| positive)
    }

    /// Pair `k` (row-major over `i < j`) is positive when bit `k` is set.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        let mut k = 0;
        Self::from_fn(n, |_, _| {
            let b = bits >> k & 1 == 1;
            k += 1;
            b
        })
    }

    pub fn seeded(n: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "diagnostics/dropedge/signs");
        Self::from_fn(n, |_, _| r.random::<bool>())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        assert!(i != j && i < self.n && j < self.n, "pair ({i}, {j}) of {}", self.n);
        self.upper[Self::index(self.n, i, j)]
    }
}

/// Where the pairwise influence signs come from. A seed also fixes the
/// regular graph and the edge influences; explicit signs use seed 0 for both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignSource {
    Seed(u64),
    Explicit(PairSigns),
}

/// A monochromatic clique whose members receive attention only from each
/// other, and the neighbour each member's attention cancels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueRelation {
    pub members: Vec<usize>,
    pub sign: i8,
    /// `(member, neighbour)` pairs whose influences cancel exactly.
    pub cancelled: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropEdgeSimReport {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub gamma: f64,
    pub eliminated_count: usize,
    /// `(r + 1) · ⌊n / R(r + 1, r + 1)⌋`
    pub guaranteed_count: usize,
    /// At least `⌊n / R(r + 1, r + 1)⌋` disjoint cliques were found.
    pub search_succeeded: bool,
    pub cliques: Vec<CliqueRelation>,
}

impl DropEdgeSimReport {
    fn empty(n: usize, d: usize, r: usize) -> Self {
        Self {
            n,
            d,
            r,
            gamma: if d > 0 { 1.0 / d as f64 } else { 0.0 },
            eliminated_count: 0,
            guaranteed_count: 0,
            search_succeeded: true,
            cliques: Vec::new(),
        }
    }
}

impl fmt::Display for DropEdgeSimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} d={} r={} eliminated={} guaranteed={}",
            self.n, self.d, self.r, self.eliminated_count, self.guaranteed_count
        )?;
        for c in &self.cliques {
            let sign = if c.sign > 0 { '+' } else { '-' };
            write!(f, "; {sign}{:?}", c.members)?;
        }
        Ok(())
    }
}

/// Seeded simple `d`-regular graph: a circulant graph randomized by
/// degree-preserving double edge swaps.
pub fn regular_graph(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= n || (n * d) % 2 == 1 {
        return Err(Error::Param(format!("no simple {d}-regular graph on {n} vertices")));
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * d / 2);
    for i in 0..n {
        for k in 1..=d / 2 {
            edges.push(ordered(i, (i + k) % n));
        }
        if d % 2 == 1 && i < n / 2 {
            edges.push(ordered(i, i + n / 2));
        }
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut r = rng::stream(seed, "diagnostics/dropedge/graph");
    if edges.len() >= 2 {
        for _ in 0..(4 * edges.len()) {
            let x = r.random_range(0..edges.len());
            let y = r.random_range(0..edges.len());
            let ((a, b), (c, e)) = (edges[x], edges[y]);
            if x == y || a == c || a == e || b == c || b == e {
                continue;
            }
            let (p, q) = if r.random::<bool>() {
                (ordered(a, c), ordered(b, e))
            } else {
                (ordered(a, e), ordered(b, c))
            };
            if present.contains(&p) || present.contains(&q) {
                continue;
            }
            present.remove(&edges[x]);
            present.remove(&edges[y]);
            present.insert(p);
            present.insert(q);
            edges[x] = p;
            edges[y] = q;
        }
    }
    Graph::new(n, edges)
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Influence sign each neighbour exerts on a vertex. Every vertex with at
/// least two neighbours gets both signs.
pub fn edge_influences(g: &Graph, seed: u64) -> Vec<Vec<(usize, i8)>> {
    let mut r = rng::stream(seed, "diagnostics/dropedge/influence");
    g.neighbors()
        .into_iter()
        .map(|nb| {
            let mut signs: Vec<i8> = nb.iter().map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
            if signs.len() >= 2 && signs.iter().all(|&s| s == signs[0]) {
                let k = r.random_range(0..signs.len());
                signs[k] = -signs[k];
            }
            nb.into_iter().zip(signs).collect()
        })
        .collect()
}

fn mono_extend(signs: &PairSigns, alive: &[usize], size: usize, chosen: &mut Vec<usize>, start: usize) -> Option<i8> {
    if chosen.len() == size {
        return Some(if size >= 2 { signs.get(chosen[0], chosen[1]) } else { 1 });
    }
    for k in start..alive.len() {
        let v = alive[k];
        let fits = match chosen.len() {
            0 | 1 => true,
            _ => {
                let colour = signs.get(chosen[0], chosen[1]);
                chosen.iter().all(|&u| signs.get(u, v) == colour)
            }
        };
        if !fits {
            continue;
        }
        chosen.push(v);
        if let Some(s) = mono_extend(signs, alive, size, chosen, k + 1) {
            return Some(s);
        }
        chosen.pop();
    }
    None
}

/// Lexicographically first clique of `size` vertices from `alive` whose
/// pairs all carry the same sign.
pub fn find_monochromatic_clique(signs: &PairSigns, alive: &[usize], size: usize) -> Option<(Vec<usize>, i8)> {
    let mut chosen = Vec::with_capacity(size);
    mono_extend(signs, alive, size, &mut chosen, 0).map(|s| (chosen, s))
}

fn simulate(g: &Graph, influence: &[Vec<(usize, i8)>], signs: &PairSigns, d: usize, r: usize) -> DropEdgeSimReport {
    let n = g.n();
    let size = r + 1;
    let ramsey = ramsey_diagonal(size).expect("checked by caller");
    let gamma = 1.0 / d as f64;
    let mut alive: Vec<usize> = (0..n).collect();
    let mut cliques = Vec::new();
    let mut eliminated = 0;
    while let Some((members, sign)) = find_monochromatic_clique(signs, &alive, size) {
        alive.retain(|v| !members.contains(v));
        let mut cancelled = Vec::new();
        for &v in &members {
            // normalized attention over the other r members, scaled by γ
            let total: i64 = members.iter().filter(|&&u| u != v).map(|&u| signs.get(u, v) as i64).sum();
            let attention = gamma * (total as f64 / r as f64);
            if let Some(&(u, _)) = influence[v]
                .iter()
                .find(|&&(_, s)| attention + s as f64 / d as f64 == 0.0)
            {
                cancelled.push((v, u));
                eliminated += 1;
            }
        }
        cliques.push(CliqueRelation {
            members,
            sign,
            cancelled,
        });
    }
    let blocks = n / ramsey;
    DropEdgeSimReport {
        n,
        d,
        r,
        gamma,
        eliminated_count: eliminated,
        guaranteed_count: size * blocks,
        search_succeeded: cliques.len() >= blocks,
        cliques,
    }
}

fn check_params(n: usize, d: usize, r: usize) -> Result<()> {
    if !(1..=2).contains(&r) {
        return Err(Error::Param(format!("r must be 1 or 2, got {r}")));
    }
    if r >= n {
        return Err(Error::Param(format!("r = {r} must be below n = {n}")));
    }
    if d < 2 {
        return Err(Error::Param(format!(
            "d = {d}: mixed neighbour influences need at least two neighbours"
        )));
    }
    Ok(())
}

/// Builds a `d`-regular graph with mixed-sign neighbour influences, packs
/// disjoint monochromatic `(r+1)`-cliques greedily (each step an exhaustive
/// search over the remaining vertices), lets each clique member attend only
/// to the other members with `γ = 1/d`, and counts the members whose
/// attention cancels one neighbour's influence exactly.
pub fn dropedge_simulation(n: usize, d: usize, r: usize, signs: &SignSource) -> Result<DropEdgeSimReport> {
    if n < 2 {
        return Ok(DropEdgeSimReport::empty(n, d, r));
    }
    check_params(n, d, r)?;
    let (seed, pair_signs) = match signs {
        SignSource::Seed(s) => (*s, PairSigns::seeded(n, *s)),
        SignSource::Explicit(p) => {
            if p.n() != n {
                return Err(Error::Param(format!("signs cover {} vertices, n = {n}", p.n())));
            }
            (0, p.clone())
        }
    };
    let g = regular_graph(n, d, seed)?;
    let influence = edge_influences(&g, seed);
    Ok(simulate(&g, &influence, &pair_signs, d, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSweep {
    pub n: usize,
    pub r: usize,
    pub assignments: u64,
    /// Assignments containing a monochromatic `(r+1)`-clique.
    pub with_clique: u64,
    pub min_eliminated: usize,
    pub guaranteed_count: usize,
}

/// Runs the simulation for every one of the `2^(n(n-1)/2)` sign assignments
/// on one fixed graph. Limited to `n ≤ 7`.
pub fn exhaustive_sign_sweep(n: usize, d: usize, r: usize, seed: u64) -> Result<SignSweep> {
    check_params(n, d, r)?;
    if n > 7 {
        return Err(Error::Param(format!("exhaustive sweep limited to n ≤ 7, got {n}")));
    }
    let g = regular_graph(n, d, seed)?;
    let influence = edge_influences(&g, seed);
    let total = 1u64 << PairSigns::pairs(n);
    let all: Vec<usize> = (0..n).collect();
    let mut sweep = SignSweep {
        n,
        r,
        assignments: total,
        with_clique: 0,
        min_eliminated: usize::MAX,
        guaranteed_count: 0,
    };
    for bits in 0..total {
        let signs = PairSigns::from_bits(n, bits);
        if find_monochromatic_clique(&signs, &all, r + 1).is_some() {
            sweep.with_clique += 1;
        }
        let rep = simulate(&g, &influence, &signs, d, r);
        sweep.min_eliminated = sweep.min_eliminated.min(rep.eliminated_count);
        sweep.guaranteed_count = rep.guaranteed_count;
    }
    Ok(sweep)
}
