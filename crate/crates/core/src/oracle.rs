//! Brute-force reference searches for validating the algorithmic modules.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::book_engine::{run_with, EngineParams, Outcome};
use crate::colouring::EdgeColouring;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::vertex_set::VertexSet;

pub use crate::geometry::{moment_double_sum, moment_tensor};

/// Limits on the exhaustive searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    pub n_cap: usize,
    pub k_cap: usize,
    pub node_limit: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            n_cap: 256,
            k_cap: 64,
            node_limit: 200_000_000,
        }
    }
}

impl SearchBudget {
    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.n_cap {
            return Err(Error::BudgetExceeded(format!("n = {n} exceeds n_cap = {}", self.n_cap)));
        }
        Ok(())
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.k_cap {
            return Err(Error::BudgetExceeded(format!("k = {k} exceeds k_cap = {}", self.k_cap)));
        }
        Ok(())
    }
}

struct Nodes<'a> {
    count: &'a AtomicU64,
    limit: u64,
}

impl Nodes<'_> {
    fn tick(&self) -> Result<()> {
        if self.count.fetch_add(1, Ordering::Relaxed) >= self.limit {
            return Err(Error::BudgetExceeded(format!("more than {} search nodes", self.limit)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CliqueResult {
    pub colour: usize,
    pub size: usize,
    pub witness: VertexSet,
}

/// Maximum clique of the colour-`i` graph.
pub fn max_mono_clique(c: &EdgeColouring, i: usize, budget: &SearchBudget) -> Result<CliqueResult> {
    max_mono_clique_within(c, i, &c.vertices(), budget)
}

/// Maximum colour-`i` clique inside `within`.
pub fn max_mono_clique_within(
    c: &EdgeColouring,
    i: usize,
    within: &VertexSet,
    budget: &SearchBudget,
) -> Result<CliqueResult> {
    clique_search(c, i, within, None, budget).map(|w| CliqueResult {
        colour: i,
        size: w.len(),
        witness: w,
    })
}

/// Some colour-`i` clique of exactly `k` vertices inside `within`, if any.
pub fn find_mono_clique(
    c: &EdgeColouring,
    i: usize,
    within: &VertexSet,
    k: usize,
    budget: &SearchBudget,
) -> Result<Option<VertexSet>> {
    budget.check_k(k)?;
    let best = clique_search(c, i, within, Some(k), budget)?;
    Ok((best.len() >= k).then(|| best.smallest(k)))
}

fn clique_search(
    c: &EdgeColouring,
    i: usize,
    within: &VertexSet,
    target: Option<usize>,
    budget: &SearchBudget,
) -> Result<VertexSet> {
    budget.check_n(c.n())?;
    if i >= c.r() {
        return Err(Error::InvalidColour { colour: i, r: c.r() });
    }
    let count = AtomicU64::new(0);
    let mut s = CliqueSearch {
        c,
        i,
        nodes: Nodes {
            count: &count,
            limit: budget.node_limit,
        },
        best: VertexSet::empty(c.n()),
        target,
    };
    let mut current = VertexSet::empty(c.n());
    s.expand(&mut current, within.clone())?;
    Ok(s.best)
}

struct CliqueSearch<'a> {
    c: &'a EdgeColouring,
    i: usize,
    nodes: Nodes<'a>,
    best: VertexSet,
    target: Option<usize>,
}

impl CliqueSearch<'_> {
    fn done(&self) -> bool {
        self.target.is_some_and(|k| self.best.len() >= k)
    }

    /// Greedy colouring of `p` in vertex order: returns vertices with their
    /// colour-class index, an upper bound on the clique number of the prefix.
    fn colour_bound(&self, p: &VertexSet) -> Vec<(usize, usize)> {
        let mut order = Vec::with_capacity(p.len());
        let mut uncoloured = p.clone();
        let mut k = 0;
        while !uncoloured.is_empty() {
            k += 1;
            let mut q = uncoloured.clone();
            while let Some(v) = q.first() {
                q.remove(v);
                q = q.difference(self.c.nbhd_unchecked(v, self.i));
                uncoloured.remove(v);
                order.push((v, k));
            }
        }
        order
    }

    fn expand(&mut self, current: &mut VertexSet, p: VertexSet) -> Result<()> {
        self.nodes.tick()?;
        if current.len() > self.best.len() {
            self.best = current.clone();
            if self.done() {
                return Ok(());
            }
        }
        let mut p = p;
        let order = self.colour_bound(&p);
        for &(v, bound) in order.iter().rev() {
            if current.len() + bound <= self.best.len() {
                return Ok(());
            }
            current.insert(v);
            let next = p.intersection(self.c.nbhd_unchecked(v, self.i));
            self.expand(current, next)?;
            current.remove(v);
            if self.done() {
                return Ok(());
            }
            p.remove(v);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Books

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BookResult {
    pub m_max: usize,
    pub colour: usize,
    pub spine: VertexSet,
    pub pages: VertexSet,
}

/// The monochromatic book with a `t`-vertex spine and the most pages.
/// `None` when no colour has a `t`-clique.
pub fn best_book(c: &EdgeColouring, t: usize, budget: &SearchBudget) -> Result<Option<BookResult>> {
    if t == 0 {
        return Err(Error::InvalidInput("spine size must be >= 1".into()));
    }
    budget.check_n(c.n())?;
    budget.check_k(t)?;
    let count = AtomicU64::new(0);
    let nodes = Nodes {
        count: &count,
        limit: budget.node_limit,
    };
    let mut best: Option<BookResult> = None;
    for i in 0..c.r() {
        let mut spine = VertexSet::empty(c.n());
        books_rec(c, i, t, &mut spine, &c.vertices(), &c.vertices(), &nodes, &mut best)?;
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn books_rec(
    c: &EdgeColouring,
    i: usize,
    t: usize,
    spine: &mut VertexSet,
    common: &VertexSet,
    cand: &VertexSet,
    nodes: &Nodes<'_>,
    best: &mut Option<BookResult>,
) -> Result<()> {
    nodes.tick()?;
    if spine.len() == t {
        let m = common.len();
        if best.as_ref().is_none_or(|b| m > b.m_max) {
            *best = Some(BookResult {
                m_max: m,
                colour: i,
                spine: spine.clone(),
                pages: common.clone(),
            });
        }
        return Ok(());
    }
    if best.as_ref().is_some_and(|b| common.len() <= b.m_max) {
        // pages only shrink as the spine grows
        return Ok(());
    }
    for v in cand.to_vec() {
        let nb = c.nbhd_unchecked(v, i);
        let next_common = common.intersection(nb);
        let mut next_cand = cand.intersection(nb);
        for u in 0..=v {
            next_cand.remove(u);
        }
        spine.insert(v);
        books_rec(c, i, t, spine, &next_common, &next_cand, nodes, best)?;
        spine.remove(v);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Small Ramsey numbers

#[derive(Clone, Debug, PartialEq)]
pub enum RamseyOutcome {
    AllColouringsContainMono,
    CounterexampleFound(EdgeColouring),
}

/// Decides whether every `r`-colouring of `K_n` has a colour-`i` `K_{ks[i]}`
/// for some `i`, by backtracking over edge colourings.
///
/// Colourings are normalised so that the edges at vertex 0 carry
/// non-decreasing colours, and colours with equal clique targets appear
/// there with non-increasing multiplicity.
pub fn ramsey_exhaustive(r: usize, ks: &[usize], n: usize, budget: &SearchBudget, exec: Exec) -> Result<RamseyOutcome> {
    if r == 0 || ks.len() != r || r > u8::MAX as usize {
        return Err(Error::InvalidInput(format!("need {r} clique sizes, got {}", ks.len())));
    }
    if n > 64 {
        return Err(Error::BudgetExceeded(format!(
            "n = {n} exceeds the 64-vertex search limit"
        )));
    }
    budget.check_n(n)?;
    if ks.iter().any(|&k| k == 0 || (k == 1 && n >= 1)) {
        return Ok(RamseyOutcome::AllColouringsContainMono);
    }
    if n < 2 {
        let c = EdgeColouring::from_fn(n, r, |_, _| 0)?;
        return Ok(RamseyOutcome::CounterexampleFound(c));
    }

    let roots = first_rows(r, ks, n - 1);
    let count = AtomicU64::new(0);
    let nodes = Nodes {
        count: &count,
        limit: budget.node_limit,
    };
    let results = exec.map_slice(&roots, |row| {
        let mut s = RamseySearch::new(r, ks, n, &nodes);
        for (v, &col) in row.iter().enumerate() {
            if !s.assign(0, v + 1, col as usize) {
                return Ok(None);
            }
        }
        s.search().map(|found| found.then(|| s.to_colouring()))
    });
    for res in results {
        if let Some(c) = res? {
            return Ok(RamseyOutcome::CounterexampleFound(c?));
        }
    }
    Ok(RamseyOutcome::AllColouringsContainMono)
}

/// Canonical colourings of the edges at vertex 0.
fn first_rows(r: usize, ks: &[usize], len: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; r];
    fn rec(r: usize, ks: &[usize], left: usize, col: usize, counts: &mut Vec<usize>, out: &mut Vec<Vec<u8>>) {
        if col == r {
            if left == 0 {
                let row = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(c, &m)| std::iter::repeat_n(c as u8, m))
                    .collect();
                out.push(row);
            }
            return;
        }
        let cap = (0..col)
            .rev()
            .find(|&d| ks[d] == ks[col])
            .map_or(left, |d| counts[d].min(left));
        for m in 0..=cap {
            counts[col] = m;
            rec(r, ks, left - m, col + 1, counts, out);
        }
        counts[col] = 0;
    }
    rec(r, ks, len, 0, &mut counts, &mut out);
    out
}

struct RamseySearch<'a> {
    r: usize,
    ks: &'a [usize],
    n: usize,
    /// `adj[c][v]`: colour-`c` neighbours of `v` among assigned edges.
    adj: Vec<Vec<u64>>,
    colours: Vec<u8>,
    nodes: &'a Nodes<'a>,
}

impl<'a> RamseySearch<'a> {
    fn new(r: usize, ks: &'a [usize], n: usize, nodes: &'a Nodes<'a>) -> Self {
        RamseySearch {
            r,
            ks,
            n,
            adj: vec![vec![0; n]; r],
            colours: vec![0; n * n],
            nodes,
        }
    }

    /// Colours `{u, v}`; false if that completes a forbidden clique.
    fn assign(&mut self, u: usize, v: usize, col: usize) -> bool {
        let common = self.adj[col][u] & self.adj[col][v];
        if has_clique(&self.adj[col], common, self.ks[col].saturating_sub(2)) {
            return false;
        }
        self.adj[col][u] |= 1 << v;
        self.adj[col][v] |= 1 << u;
        self.colours[u * self.n + v] = col as u8;
        true
    }

    fn unassign(&mut self, u: usize, v: usize, col: usize) {
        self.adj[col][u] &= !(1 << v);
        self.adj[col][v] &= !(1 << u);
    }

    /// Depth-first over the edges `(u, v)`, `1 <= u < v`, in row-major order.
    fn search(&mut self) -> Result<bool> {
        let edges: Vec<(usize, usize)> = (1..self.n)
            .flat_map(|u| ((u + 1)..self.n).map(move |v| (u, v)))
            .collect();
        self.dfs(&edges, 0)
    }

    fn dfs(&mut self, edges: &[(usize, usize)], e: usize) -> Result<bool> {
        self.nodes.tick()?;
        if e == edges.len() {
            return Ok(true);
        }
        let (u, v) = edges[e];
        for col in 0..self.r {
            if self.assign(u, v, col) {
                if self.dfs(edges, e + 1)? {
                    return Ok(true);
                }
                self.unassign(u, v, col);
            }
        }
        Ok(false)
    }

    fn to_colouring(&self) -> Result<EdgeColouring> {
        EdgeColouring::from_fn(self.n, self.r, |u, v| {
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            self.colours[a * self.n + b] as usize
        })
    }
}

/// Whether the graph `adj` restricted to `set` has a clique of `size` vertices.
fn has_clique(adj: &[u64], set: u64, size: usize) -> bool {
    if size == 0 {
        return true;
    }
    if (set.count_ones() as usize) < size {
        return false;
    }
    let mut rest = set;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if has_clique(adj, rest & adj[v], size - 1) {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Engine validation

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BookValidation {
    pub outcome: Outcome,
    pub m_engine: Option<usize>,
    pub m_max: Option<usize>,
    pub ratio: Option<f64>,
    pub valid: bool,
}

/// Runs the engine on `X = Y_i = V` and compares any book it finds with the
/// best book whose spine has `t` vertices.
pub fn validate_book_engine(c: &EdgeColouring, params: &EngineParams, budget: &SearchBudget) -> Result<BookValidation> {
    budget.check_n(c.n())?;
    let v = c.vertices();
    let out = run_with(c, &v, &vec![v.clone(); c.r()], params, Exec::Sequential)?;
    let m_max = best_book(c, params.t, budget)?.map(|b| b.m_max);
    let (m_engine, valid) = match &out.result {
        Outcome::BookFound { colour, spine, pages } => {
            let ok = c.is_mono_book(spine, pages, *colour)?
                && spine.len() == params.t
                && m_max.is_some_and(|m| pages.len() <= m);
            (Some(pages.len()), ok)
        }
        _ => (None, true),
    };
    let ratio = match (m_engine, m_max) {
        (Some(a), Some(b)) if b > 0 => Some(a as f64 / b as f64),
        _ => None,
    };
    Ok(BookValidation {
        outcome: out.result,
        m_engine,
        m_max,
        ratio,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn naive_clique(c: &EdgeColouring, i: usize) -> usize {
        let n = c.n();
        (0u32..1 << n)
            .filter(|&m| {
                let s = VertexSet::from_vertices(n, (0..n).filter(|&v| m >> v & 1 == 1));
                c.is_mono_clique(&s, i)
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn clique_examples() {
        let b = SearchBudget::default();
        let c5 = EdgeColouring::pentagon();
        assert_eq!(max_mono_clique(&c5, 0, &b).unwrap().size, 2);
        let k6 = EdgeColouring::monochromatic(6, 2, 0).unwrap();
        assert_eq!(max_mono_clique(&k6, 0, &b).unwrap().size, 6);
        assert_eq!(max_mono_clique(&k6, 1, &b).unwrap().size, 1);
        let prod = crate::product_colouring(&c5, &c5).unwrap();
        let res = max_mono_clique(&prod, 0, &b).unwrap();
        assert_eq!(res.size, 2);
        assert!(prod.is_mono_clique(&res.witness, 0));
    }

    #[test]
    fn clique_matches_subset_enumeration() {
        for seed in 0..20 {
            let c = crate::random_colouring(10, 2 + (seed as usize % 2), seed).unwrap();
            for i in 0..c.r() {
                let got = max_mono_clique(&c, i, &SearchBudget::default()).unwrap();
                assert_eq!(got.size, naive_clique(&c, i), "seed {seed} colour {i}");
                assert!(c.is_mono_clique(&got.witness, i));
            }
        }
    }

    #[test]
    fn node_budget_is_enforced() {
        let c = crate::random_colouring(40, 2, 1).unwrap();
        let tiny = SearchBudget {
            node_limit: 3,
            ..SearchBudget::default()
        };
        assert!(matches!(max_mono_clique(&c, 0, &tiny), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn book_examples() {
        let b = SearchBudget::default();
        let c5 = EdgeColouring::pentagon();
        let one = best_book(&c5, 1, &b).unwrap().unwrap();
        assert_eq!((one.m_max, one.colour), (2, 0));
        assert_eq!(one.spine.to_vec(), vec![0]);
        let two = best_book(&c5, 2, &b).unwrap().unwrap();
        assert_eq!(two.m_max, 0);
        assert_eq!((two.colour, two.spine.to_vec()), (0, vec![0, 1]));
        let k4 = EdgeColouring::monochromatic(4, 2, 0).unwrap();
        assert_eq!(best_book(&k4, 2, &b).unwrap().unwrap().m_max, 2);
        assert!(best_book(&c5, 3, &b).unwrap().is_none());
    }

    #[test]
    fn single_spine_books_are_max_degrees() {
        for seed in 0..10 {
            let c = crate::random_colouring(14, 3, seed).unwrap();
            let best = best_book(&c, 1, &SearchBudget::default()).unwrap().unwrap();
            let deg = (0..3)
                .flat_map(|i| (0..14).map(move |v| (i, v)))
                .map(|(i, v)| c.neighbourhood(v, i).unwrap().len())
                .max()
                .unwrap();
            assert_eq!(best.m_max, deg);
        }
    }

    #[test]
    fn small_ramsey_numbers() {
        let b = SearchBudget::default();
        for exec in [Exec::Sequential, Exec::Parallel] {
            match ramsey_exhaustive(2, &[3, 3], 5, &b, exec).unwrap() {
                RamseyOutcome::CounterexampleFound(c) => {
                    assert_eq!(max_mono_clique(&c, 0, &b).unwrap().size, 2);
                    assert_eq!(max_mono_clique(&c, 1, &b).unwrap().size, 2);
                }
                other => panic!("{other:?}"),
            }
            assert_eq!(
                ramsey_exhaustive(2, &[3, 3], 6, &b, exec).unwrap(),
                RamseyOutcome::AllColouringsContainMono
            );
        }
        assert_eq!(
            ramsey_exhaustive(1, &[4], 4, &b, Exec::Sequential).unwrap(),
            RamseyOutcome::AllColouringsContainMono
        );
        assert!(matches!(
            ramsey_exhaustive(1, &[4], 3, &b, Exec::Sequential).unwrap(),
            RamseyOutcome::CounterexampleFound(_)
        ));
        // R(3, 4) = 9
        assert!(matches!(
            ramsey_exhaustive(2, &[3, 4], 8, &b, Exec::Parallel).unwrap(),
            RamseyOutcome::CounterexampleFound(_)
        ));
        assert_eq!(
            ramsey_exhaustive(2, &[3, 4], 9, &b, Exec::Parallel).unwrap(),
            RamseyOutcome::AllColouringsContainMono
        );
    }

    #[test]
    fn engine_validation() {
        let b = SearchBudget::default();
        let c5 = EdgeColouring::pentagon();
        let prm = EngineParams::new(2, 1, int(100), rat(1, 8)).unwrap();
        let v = validate_book_engine(&c5, &prm, &b).unwrap();
        assert!(v.valid && v.m_engine.unwrap() <= 2);

        let k8 = EdgeColouring::monochromatic(8, 1, 0).unwrap();
        let prm = EngineParams::new(1, 2, int(100), rat(1, 8)).unwrap();
        let v = validate_book_engine(&k8, &prm, &b).unwrap();
        // the witness is carried by the diagonal pairs alone, so X' is empty
        assert_eq!(v.outcome, Outcome::ReservoirExhausted);
        assert!(v.valid);
        assert_eq!(v.m_max, Some(6));
    }
}
