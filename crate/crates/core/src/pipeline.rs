//! Degree regularisation and a small-scale Ramsey driver built on the book
//! engine.
//!
//! [`regularise`] peels off vertices of low degree in some colour until the
//! remaining set `W` is nearly regular in every colour, collecting the peeled
//! vertices into spines `S_i` so that every `(S_i, W)` is a monochromatic
//! book. [`desk_ramsey_driver`] then either uses a large `S_i` directly or
//! runs the book engine on `W` and looks for a clique among the pages.

use num_bigint::BigUint;
use num_traits::{One, Signed};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::book_engine::{run_with, EngineParams, Outcome};
use crate::bounds::{Check, Relation};
use crate::colouring::EdgeColouring;
use crate::error::{Error, Result};
use crate::exact::{self, int, powi, rat, Rational};
use crate::oracle::{find_mono_clique, max_mono_clique, CliqueResult, SearchBudget};
use crate::par::Exec;
use crate::real::Interval;
use crate::vertex_set::VertexSet;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularisationResult {
    pub s: Vec<VertexSet>,
    pub w: VertexSet,
    #[serde(with = "exact::string")]
    pub eps: Rational,
    /// Peeled vertices in order, with the colour each joined.
    pub steps: Vec<(usize, usize)>,
}

impl RegularisationResult {
    pub fn spine_total(&self) -> usize {
        self.s.iter().map(VertexSet::len).sum()
    }
}

fn degree_floor(r: usize, eps: &Rational, size: usize) -> Rational {
    (Rational::one() / int(r as i64) - eps) * int(size as i64) - Rational::one()
}

/// Peels vertices until every `w ∈ W` has `|N_i(w) ∩ W| >= (1/r − ε)|W| − 1`
/// in every colour.
///
/// The lowest violating vertex is moved into `S_j` for the colour `j` with the
/// largest neighbourhood inside the current set (lowest `j` on ties), and the
/// search continues inside that neighbourhood.
pub fn regularise(c: &EdgeColouring, eps: &Rational) -> Result<RegularisationResult> {
    if !eps.is_positive() || eps >= &Rational::one() {
        return Err(Error::InvalidInput("eps must lie in (0, 1)".into()));
    }
    let (n, r) = (c.n(), c.r());
    let mut s = vec![VertexSet::empty(n); r];
    let mut v = c.vertices();
    let mut steps = Vec::new();
    loop {
        if v.len() <= r || r == 1 {
            break;
        }
        let floor = degree_floor(r, eps, v.len());
        let mut violator = None;
        'scan: for x in v.iter() {
            for l in 0..r {
                let d = c.neighbourhood(x, l)?.intersection_len(&v);
                if Rational::from_integer(d.into()) < floor {
                    violator = Some((x, l));
                    break 'scan;
                }
            }
        }
        let Some((x, l)) = violator else { break };
        let mut best: Option<(usize, usize)> = None;
        for j in (0..r).filter(|&j| j != l) {
            let d = c.neighbourhood(x, j)?.intersection_len(&v);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("r >= 2 here");
        s[j].insert(x);
        v = c.neighbourhood(x, j)?.intersection(&v);
        steps.push((x, j));
    }
    Ok(RegularisationResult {
        s,
        w: v,
        eps: eps.clone(),
        steps,
    })
}

/// Recounts the three output guarantees of [`regularise`] from scratch.
pub fn verify_regularisation(c: &EdgeColouring, res: &RegularisationResult) -> Result<()> {
    let (n, r) = (c.n(), c.r());
    let fail = |detail: String| Err(Error::violation("regularisation", detail));
    if res.s.len() != r {
        return fail(format!("expected {r} spines, got {}", res.s.len()));
    }
    let mut seen = res.w.clone();
    for (i, si) in res.s.iter().enumerate() {
        if !seen.is_disjoint(si) {
            return fail(format!("S_{i} overlaps another part"));
        }
        seen = seen.union(si);
    }

    let total = res.spine_total() as i64;
    let lhs = int(res.w.len() as i64) * powi(&int(r as i64), total);
    let rhs = powi(&(Rational::one() + &res.eps), total) * int(n as i64);
    if lhs < rhs {
        return fail(format!("|W| = {} below ((1+eps)/r)^{total} n", res.w.len()));
    }

    let floor = degree_floor(r, &res.eps, res.w.len());
    for w in res.w.iter() {
        for i in 0..r {
            let d = c.neighbourhood(w, i)?.intersection_len(&res.w);
            if Rational::from_integer(d.into()) < floor {
                return fail(format!("vertex {w} has {d} colour-{i} neighbours in W, need {floor}"));
            }
        }
    }

    for (i, si) in res.s.iter().enumerate() {
        if !c.is_mono_book(si, &res.w, i)? {
            return fail(format!("(S_{i}, W) is not a colour-{i} book"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Escape bound

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub r: u64,
    pub k: u64,
    #[serde(with = "exact::string")]
    pub eps: Rational,
    pub s: Vec<u64>,
    /// Multinomial form of the Erdős–Szekeres bound against `r^{rk−s}`.
    /// Absent when some `k − s_i` is zero.
    pub multinomial: Option<Check>,
    /// `r^{rk−s} <= e^{−ε³k/2} ((1+ε)/r)^s r^{rk}`.
    pub bound: Check,
    /// `(1+ε)^{ε²k} >= e^{ε³k/2}`.
    pub growth: Check,
}

impl EscapeReport {
    pub fn pass(&self) -> bool {
        self.bound.pass && self.growth.pass && self.multinomial.as_ref().is_none_or(|c| c.pass)
    }
}

pub fn lemma53_check(r: u64, k: u64, eps: &Rational, s: &[u64]) -> Result<EscapeReport> {
    if r < 2 || k < 2 {
        return Err(Error::InvalidInput("need r, k >= 2".into()));
    }
    if !eps.is_positive() || eps >= &Rational::one() {
        return Err(Error::InvalidInput("eps must lie in (0, 1)".into()));
    }
    if s.len() as u64 != r {
        return Err(Error::InvalidInput(format!(
            "expected {r} values of s_i, got {}",
            s.len()
        )));
    }
    if let Some(bad) = s.iter().find(|&&si| si > k) {
        return Err(Error::InvalidInput(format!("s_i = {bad} exceeds k = {k}")));
    }
    let total: u64 = s.iter().sum();
    let kq = int(k as i64);
    if int(total as i64) < eps * eps * &kq {
        return Err(Error::InvalidInput(format!("s = {total} is below eps^2 k")));
    }

    let ln_r = Interval::from_u64(r).ln();
    let ln_1e = Interval::from_rational(&(Rational::one() + eps)).ln();
    let half_cube = Interval::from_rational(&(eps * eps * eps * &kq / int(2)));
    let lhs_log = ln_r.mul_u64(r * k - total);
    let rhs_log = half_cube
        .neg()
        .add(&ln_1e.sub(&ln_r).mul_u64(total))
        .add(&ln_r.mul_u64(r * k));
    let bound = Check::of_logs("bound", &lhs_log, Relation::Le, &rhs_log);

    let line_lhs = ln_1e.mul(&Interval::from_rational(&(eps * eps * &kq)));
    let growth = Check::of_logs("growth", &line_lhs, Relation::Ge, &half_cube);

    let multinomial = s.iter().all(|&si| si < k).then(|| {
        let ks: Vec<u64> = s.iter().map(|&si| k - si).collect();
        let m = crate::bounds::multinomial(&ks);
        let crude = BigUint::from(r).pow((r * k - total) as u32);
        Check::exact(
            "multinomial",
            &Rational::from_integer(m.into()),
            Relation::Le,
            &Rational::from_integer(crude.into()),
        )
    });

    Ok(EscapeReport {
        r,
        k,
        eps: eps.clone(),
        s: s.to_vec(),
        multinomial,
        bound,
        growth,
    })
}

// ---------------------------------------------------------------------------
// Driver

#[derive(Clone, Debug, Serialize)]
pub struct DriverConfig {
    #[serde(with = "exact::string")]
    pub eps: Rational,
    pub t: usize,
    #[serde(with = "exact::string")]
    pub lambda0: Rational,
    #[serde(with = "exact::string")]
    pub delta: Rational,
    /// Take the escape branch once `Σ|S_i|` reaches this. Defaults to
    /// `⌈ε²k⌉`.
    pub escape_threshold: Option<usize>,
    /// Split `W` at random into `X, Y_1, …, Y_r` instead of using `W` for all.
    pub partition_seed: Option<u64>,
    pub budget: SearchBudget,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            eps: rat(1, 20),
            t: 1,
            lambda0: int(10),
            delta: rat(1, 16),
            escape_threshold: None,
            partition_seed: None,
            budget: SearchBudget::default(),
        }
    }
}

pub const DESK_MAX_K: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Trivial,
    Escape,
    Book,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineSummary {
    pub outcome: Outcome,
    pub rounds: usize,
    pub trace_hash: String,
    /// Whether a returned book was re-verified as monochromatic.
    pub book_valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum DriverResult {
    CliqueFound {
        colour: usize,
        clique: VertexSet,
    },
    /// Where the pipeline stopped without a clique.
    BookPhaseReport {
        stage: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriverReport {
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub branch: Branch,
    pub spine_sizes: Vec<usize>,
    pub w_size: usize,
    pub engine: Option<EngineSummary>,
    pub result: DriverResult,
    /// Largest clique in each colour, when the oracle fits the budget.
    pub oracle: Option<Vec<CliqueResult>>,
}

fn partition(w: &VertexSet, r: usize, seed: u64) -> (VertexSet, Vec<VertexSet>) {
    let n = w.universe();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = vec![VertexSet::empty(n); r + 1];
    for v in w.iter() {
        parts[rng.gen_range(0..=r)].insert(v);
    }
    let x = parts.remove(0);
    (x, parts)
}

/// Looks for a monochromatic `K_k` by regularising, then either growing a
/// large spine `S_i` inside `W` or running the book engine on `W` and
/// searching the pages.
pub fn desk_ramsey_driver(c: &EdgeColouring, k: usize, cfg: &DriverConfig) -> Result<DriverReport> {
    if k > DESK_MAX_K {
        return Err(Error::ScaleError(format!(
            "k = {k} exceeds the desk limit {DESK_MAX_K}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let (n, r) = (c.n(), c.r());
    let oracle = (0..r)
        .map(|i| max_mono_clique(c, i, &cfg.budget))
        .collect::<Result<Vec<_>>>()
        .ok();
    let mut report = DriverReport {
        n,
        r,
        k,
        branch: Branch::Trivial,
        spine_sizes: vec![0; r],
        w_size: n,
        engine: None,
        result: DriverResult::BookPhaseReport {
            stage: "too_few_vertices".into(),
        },
        oracle,
    };

    if k <= 2 {
        if n >= k {
            let colour = if k == 2 { c.colour(0, 1)? } else { 0 };
            report.result = DriverResult::CliqueFound {
                colour,
                clique: VertexSet::from_vertices(n, 0..k),
            };
        }
        return finish(c, report);
    }

    let reg = regularise(c, &cfg.eps)?;
    report.spine_sizes = reg.s.iter().map(VertexSet::len).collect();
    report.w_size = reg.w.len();

    let threshold = match cfg.escape_threshold {
        Some(th) => th,
        None => exact::ceil(&(&cfg.eps * &cfg.eps * int(k as i64)))
            .try_into()
            .unwrap_or(usize::MAX),
    };
    if reg.spine_total() >= threshold {
        report.branch = Branch::Escape;
        report.result = DriverResult::BookPhaseReport {
            stage: "escape_without_clique".into(),
        };
        for (i, si) in reg.s.iter().enumerate() {
            if si.len() >= k {
                report.result = DriverResult::CliqueFound {
                    colour: i,
                    clique: si.smallest(k),
                };
                break;
            }
            if let Some(extra) = find_mono_clique(c, i, &reg.w, k - si.len(), &cfg.budget)? {
                report.result = DriverResult::CliqueFound {
                    colour: i,
                    clique: si.union(&extra),
                };
                break;
            }
        }
        return finish(c, report);
    }

    report.branch = Branch::Book;
    let (x, ys) = match cfg.partition_seed {
        Some(seed) => partition(&reg.w, r, seed),
        None => (reg.w.clone(), vec![reg.w.clone(); r]),
    };
    let params = EngineParams::new(r, cfg.t, cfg.lambda0.clone(), cfg.delta.clone())?;
    let out = match run_with(c, &x, &ys, &params, Exec::default()) {
        Ok(out) => out,
        Err(Error::DegenerateDensity { .. } | Error::EmptySet) => {
            report.result = DriverResult::BookPhaseReport {
                stage: "degenerate_start".into(),
            };
            return finish(c, report);
        }
        Err(e) => return Err(e),
    };
    let mut summary = EngineSummary {
        outcome: out.result.clone(),
        rounds: out.trace.steps.len(),
        trace_hash: out.trace.content_hash(),
        book_valid: false,
    };
    report.result = DriverResult::BookPhaseReport {
        stage: "reservoir_exhausted".into(),
    };
    match &out.result {
        Outcome::BookFound { colour, spine, pages } => {
            summary.book_valid = c.is_mono_book(spine, pages, *colour)?;
            report.result = DriverResult::BookPhaseReport {
                stage: "no_clique_in_pages".into(),
            };
            if spine.len() >= k {
                report.result = DriverResult::CliqueFound {
                    colour: *colour,
                    clique: spine.smallest(k),
                };
            } else if let Some(extra) = find_mono_clique(c, *colour, pages, k - spine.len(), &cfg.budget)? {
                report.result = DriverResult::CliqueFound {
                    colour: *colour,
                    clique: spine.union(&extra),
                };
            }
        }
        Outcome::DegenerateDensity { .. } | Outcome::DegenerateAlpha { .. } => {
            report.result = DriverResult::BookPhaseReport {
                stage: "degenerate_density".into(),
            };
        }
        Outcome::ReservoirExhausted => {}
    }
    report.engine = Some(summary);
    finish(c, report)
}

fn finish(c: &EdgeColouring, report: DriverReport) -> Result<DriverReport> {
    if let DriverResult::CliqueFound { colour, clique } = &report.result {
        if clique.len() != report.k || !c.is_mono_clique(clique, *colour) {
            return Err(Error::violation(
                "driver",
                format!(
                    "returned set {:?} is not a colour-{colour} K_{}",
                    clique.to_vec(),
                    report.k
                ),
            ));
        }
    }
    if let Some(e) = &report.engine {
        if matches!(e.outcome, Outcome::BookFound { .. }) && !e.book_valid {
            return Err(Error::violation("driver", "engine returned an invalid book"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn star_heavy() -> EdgeColouring {
        EdgeColouring::from_fn(8, 2, |u, v| usize::from(u.min(v) != 0)).unwrap()
    }

    #[test]
    fn pentagon_is_already_regular() {
        let c = EdgeColouring::pentagon();
        let res = regularise(&c, &rat(1, 20)).unwrap();
        assert_eq!(res.w, c.vertices());
        assert!(res.s.iter().all(VertexSet::is_empty));
        verify_regularisation(&c, &res).unwrap();
    }

    #[test]
    fn one_colour_returns_everything() {
        let c = EdgeColouring::monochromatic(7, 1, 0).unwrap();
        let res = regularise(&c, &rat(1, 10)).unwrap();
        assert_eq!(res.w.len(), 7);
        assert!(res.steps.is_empty());
    }

    #[test]
    fn star_heavy_instance_recurses() {
        let c = star_heavy();
        let res = regularise(&c, &rat(1, 10)).unwrap();
        assert!(!res.steps.is_empty());
        // vertex 0 is the only colour-1 violator: it has no colour-1 edges
        assert_eq!(res.steps[0], (0, 0));
        verify_regularisation(&c, &res).unwrap();
    }

    #[test]
    fn regularise_rejects_bad_eps() {
        let c = EdgeColouring::pentagon();
        assert!(regularise(&c, &Rational::zero()).is_err());
        assert!(regularise(&c, &Rational::one()).is_err());
    }

    #[test]
    fn random_regularisations_verify() {
        for seed in 0..40 {
            let r = 2 + (seed as usize % 3);
            let c = crate::random_colouring(30 + seed as usize, r, seed).unwrap();
            for eps in [rat(1, 10), rat(1, 20)] {
                let res = regularise(&c, &eps).unwrap();
                verify_regularisation(&c, &res).unwrap();
            }
        }
    }

    #[test]
    fn verify_catches_tampering() {
        let c = star_heavy();
        let mut res = regularise(&c, &rat(1, 10)).unwrap();
        let v = res.w.first().unwrap();
        res.s[1 - res.steps[0].1].insert(v);
        assert!(verify_regularisation(&c, &res).is_err());
    }

    #[test]
    fn escape_examples() {
        let rep = lemma53_check(2, 100, &rat(1, 10), &[1, 0]).unwrap();
        assert!(rep.pass());
        let ratio = (rep.bound.rhs_log.unwrap() - rep.bound.lhs_log.unwrap()).exp();
        assert!((ratio - (-0.05f64).exp() * 1.1).abs() < 1e-9);

        let rep = lemma53_check(2, 16, &rat(1, 2), &[4, 0]).unwrap();
        assert!(rep.pass());
        assert!((rep.growth.lhs_log.unwrap() - 4.0 * 1.5f64.ln()).abs() < 1e-12);
        assert!((rep.growth.rhs_log.unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(
            lemma53_check(2, 16, &rat(1, 2), &[1, 2]),
            Err(Error::InvalidInput(_))
        ));
        assert!(lemma53_check(1, 16, &rat(1, 2), &[4]).is_err());
        assert!(lemma53_check(2, 16, &rat(1, 2), &[17, 0]).is_err());
    }

    #[test]
    fn escape_grid_passes() {
        for r in 2..=6u64 {
            for k in (2..=200u64).step_by(37) {
                for eps in [rat(1, 10), rat(1, 4), rat(1, 2)] {
                    let min_s = (&eps * &eps * int(k as i64)).ceil().to_integer();
                    let min_s: u64 = min_s.try_into().unwrap();
                    for total in [min_s, (min_s + r * k) / 2, r * k] {
                        let mut s = vec![0; r as usize];
                        let mut left = total;
                        for si in &mut s {
                            *si = left.min(k);
                            left -= *si;
                        }
                        let rep = lemma53_check(r, k, &eps, &s).unwrap();
                        assert!(rep.pass(), "r={r} k={k} eps={eps} s={s:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn driver_small_k() {
        let c = EdgeColouring::pentagon();
        let rep = desk_ramsey_driver(&c, 2, &DriverConfig::default()).unwrap();
        assert!(matches!(rep.result, DriverResult::CliqueFound { .. }));
        assert!(matches!(
            desk_ramsey_driver(&c, 7, &DriverConfig::default()),
            Err(Error::ScaleError(_))
        ));
    }

    #[test]
    fn driver_on_pentagon_finds_nothing() {
        let c = EdgeColouring::pentagon();
        let rep = desk_ramsey_driver(&c, 3, &DriverConfig::default()).unwrap();
        assert!(matches!(rep.result, DriverResult::BookPhaseReport { .. }));
        assert!(rep.oracle.unwrap().iter().all(|o| o.size < 3));
    }

    #[test]
    fn driver_random_output_is_verified() {
        for seed in 0..4 {
            let c = crate::random_colouring(80, 2, seed).unwrap();
            let rep = desk_ramsey_driver(&c, 4, &DriverConfig::default()).unwrap();
            assert_eq!(rep.branch, Branch::Escape);
            let book = DriverConfig {
                escape_threshold: Some(usize::MAX),
                ..DriverConfig::default()
            };
            assert_eq!(desk_ramsey_driver(&c, 4, &book).unwrap().branch, Branch::Book);
            if let Some(e) = &rep.engine {
                if matches!(e.outcome, Outcome::BookFound { .. }) {
                    assert!(e.book_valid);
                }
            }
            if let DriverResult::CliqueFound { colour, clique } = &rep.result {
                assert!(c.is_mono_clique(clique, *colour));
            }
        }
    }

    #[test]
    fn driver_escape_branch() {
        let c = star_heavy();
        let cfg = DriverConfig {
            eps: rat(1, 10),
            escape_threshold: Some(1),
            ..DriverConfig::default()
        };
        let rep = desk_ramsey_driver(&c, 4, &cfg).unwrap();
        assert_eq!(rep.branch, Branch::Escape);
        assert!(matches!(rep.result, DriverResult::CliqueFound { .. }));
    }

    #[test]
    fn driver_partition_is_deterministic() {
        let c = crate::random_colouring(40, 2, 9).unwrap();
        let cfg = DriverConfig {
            partition_seed: Some(3),
            ..DriverConfig::default()
        };
        let a = desk_ramsey_driver(&c, 4, &cfg).unwrap();
        let b = desk_ramsey_driver(&c, 4, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
