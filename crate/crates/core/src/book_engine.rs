//! The multicolour book algorithm as a deterministic state machine.
//!
//! Each round applies the key lemma to the live state. A small `λ` makes it
//! a colour step: the pivot joins a spine and the reservoir shrinks to its
//! neighbourhood in the most popular colour. A large `λ` makes it a
//! density-boost step, which trades reservoir size for density in colour `ℓ`.
//! Every round is logged, and the monitors at the bottom of this module
//! replay a finished trace against the density and size guarantees.

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colouring::EdgeColouring;
use crate::error::{Error, Result};
use crate::exact::{self, int, powi, rat, Rational};
use crate::geometry::{key_lemma_step_with, min_density, WitnessParams};
use crate::par::Exec;
use crate::real::{rational_or_zero, Interval};
use crate::vertex_set::VertexSet;

/// Fixed parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub r: usize,
    /// Target spine size.
    pub t: usize,
    /// Rounds with `λ > λ_0` are density-boost steps.
    #[serde(with = "exact::string")]
    pub lambda0: Rational,
    #[serde(with = "exact::string")]
    pub delta: Rational,
    pub witness: WitnessParams,
}

impl EngineParams {
    pub fn new(r: usize, t: usize, lambda0: Rational, delta: Rational) -> Result<Self> {
        let p = EngineParams {
            r,
            t,
            lambda0,
            delta,
            witness: WitnessParams::standard(r),
        };
        p.validate()?;
        Ok(p)
    }

    /// `δ = p/μ²` and `λ_0 = (μ log(1/δ) / 8C)²`, with `λ_0` rounded to the
    /// nearest double and then taken exactly.
    pub fn from_mu(r: usize, t: usize, mu: &Rational, p: &Rational) -> Result<Self> {
        if !mu.is_positive() || !p.is_positive() {
            return Err(Error::InvalidInput("mu and p must be positive".into()));
        }
        let delta = p / (mu * mu);
        let w = WitnessParams::standard(r);
        let l = rational_or_zero(mu)
            .mul(&rational_or_zero(&delta.recip()).ln())
            .div(&w.c().mul_u64(8))
            .powi(2);
        let lambda0 =
            exact::from_f64(l.to_f64()).ok_or_else(|| Error::InvalidInput("lambda_0 is not finite".into()))?;
        Self::new(r, t, lambda0, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.t == 0 {
            return Err(Error::InvalidInput("need r >= 1 and t >= 1".into()));
        }
        if self.lambda0 < -Rational::one() {
            return Err(Error::InvalidInput("lambda_0 must be >= -1".into()));
        }
        if !self.delta.is_positive() || self.delta > rat(1, 4) {
            return Err(Error::InvalidInput("delta must lie in (0, 1/4]".into()));
        }
        Ok(())
    }

    /// `α_i = (p_i − p_0 + δ)/t`.
    pub fn alpha(&self, p_i: &Rational, p0: &Rational) -> Rational {
        (p_i - p0 + &self.delta) / int(self.t as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Colour,
    Boost,
}

/// Set sizes at one instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub x: usize,
    pub y: Vec<usize>,
    pub t: Vec<usize>,
}

/// One round of the algorithm. Sizes and densities are taken after the round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub s: usize,
    pub kind: StepKind,
    /// Colour steps only.
    pub pivot: Option<usize>,
    /// Witness colour `ℓ`.
    pub colour: usize,
    /// Spine that received the pivot (colour steps only).
    pub chosen: Option<usize>,
    #[serde(with = "exact::string")]
    pub lambda: Rational,
    #[serde(with = "exact::string")]
    pub q: Rational,
    /// `|X′|` returned by the key step.
    pub x_prime: usize,
    pub sizes: Sizes,
    /// `None` once the reservoir is empty.
    #[serde(with = "exact::string_vec_opt")]
    pub densities: Option<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n: usize,
    pub params: EngineParams,
    #[serde(with = "exact::string")]
    pub p0: Rational,
    #[serde(with = "exact::string_vec")]
    pub initial_densities: Vec<Rational>,
    pub initial_sizes: Sizes,
    pub colouring_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Step(StepRecord),
}

impl Trace {
    /// JSON lines: the header, then one record per round.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::to_string(&Line::Header(self.header.clone())).expect("serialisable");
        writeln!(out, "{header}").unwrap();
        for s in &self.steps {
            writeln!(
                out,
                "{}",
                serde_json::to_string(&Line::Step(s.clone())).expect("serialisable")
            )
            .unwrap();
        }
        out
    }

    /// SHA-256 of [`Trace::to_jsonl`], lowercase hex.
    pub fn content_hash(&self) -> String {
        Sha256::digest(self.to_jsonl().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                write!(s, "{b:02x}").unwrap();
                s
            })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: no + 1,
                message: e.to_string(),
            })?;
            match (parsed, &header) {
                (Line::Header(h), None) => header = Some(h),
                (Line::Step(s), Some(_)) => steps.push(s),
                _ => {
                    return Err(Error::Parse {
                        line: no + 1,
                        message: "expected exactly one header, first".into(),
                    })
                }
            }
        }
        let header = header.ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        Ok(Trace { header, steps })
    }

    pub fn r(&self) -> usize {
        self.header.params.r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    BookFound {
        colour: usize,
        spine: VertexSet,
        pages: VertexSet,
    },
    ReservoirExhausted,
    /// Some density reached zero, so `α_i` and `σ_i` are undefined.
    DegenerateDensity {
        colour: usize,
    },
    /// Some `α_i` became non-positive.
    DegenerateAlpha {
        colour: usize,
    },
}

#[derive(Clone, Debug)]
pub struct EngineOutcome {
    pub result: Outcome,
    pub trace: Trace,
}

/// Live state of a run.
#[derive(Clone, Debug)]
pub struct Engine<'a> {
    c: &'a EdgeColouring,
    params: EngineParams,
    exec: Exec,
    p0: Rational,
    pub x: VertexSet,
    pub ys: Vec<VertexSet>,
    pub ts: Vec<VertexSet>,
    steps: Vec<StepRecord>,
    header: TraceHeader,
}

impl<'a> Engine<'a> {
    pub fn new(
        c: &'a EdgeColouring,
        x: &VertexSet,
        ys: &[VertexSet],
        params: &EngineParams,
        exec: Exec,
    ) -> Result<Self> {
        params.validate()?;
        if params.r != c.r() || ys.len() != c.r() {
            return Err(Error::InvalidInput(format!(
                "colouring has {} colours, params {}, sets {}",
                c.r(),
                params.r,
                ys.len()
            )));
        }
        if x.is_empty() || ys.iter().any(VertexSet::is_empty) {
            return Err(Error::EmptySet);
        }
        let dens = (0..c.r())
            .map(|i| min_density(c, x, &ys[i], i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = dens.iter().position(Zero::is_zero) {
            return Err(Error::DegenerateDensity { colour: i });
        }
        let p0 = dens.iter().min().unwrap().clone();
        let ts = vec![VertexSet::empty(c.n()); c.r()];
        let header = TraceHeader {
            n: c.n(),
            params: params.clone(),
            p0: p0.clone(),
            initial_densities: dens,
            initial_sizes: sizes(x, ys, &ts),
            colouring_hash: c.content_hash(),
        };
        Ok(Engine {
            c,
            params: params.clone(),
            exec,
            p0,
            x: x.clone(),
            ys: ys.to_vec(),
            ts,
            steps: Vec::new(),
            header,
        })
    }

    pub fn p0(&self) -> &Rational {
        &self.p0
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// The terminal outcome, if the run has stopped.
    pub fn finished(&self) -> Option<Outcome> {
        if let Some(i) = self.ts.iter().position(|t| t.len() >= self.params.t) {
            return Some(Outcome::BookFound {
                colour: i,
                spine: self.ts[i].clone(),
                pages: self.ys[i].clone(),
            });
        }
        self.x.is_empty().then_some(Outcome::ReservoirExhausted)
    }

    /// Runs one round. Returns the outcome when the run is over.
    pub fn step(&mut self) -> Result<Option<Outcome>> {
        if let Some(done) = self.finished() {
            return Ok(Some(done));
        }
        let r = self.c.r();
        let mut alphas = Vec::with_capacity(r);
        for i in 0..r {
            let p = min_density(self.c, &self.x, &self.ys[i], i)?;
            if p.is_zero() {
                return Ok(Some(Outcome::DegenerateDensity { colour: i }));
            }
            let a = self.params.alpha(&p, &self.p0);
            if !a.is_positive() {
                return Ok(Some(Outcome::DegenerateAlpha { colour: i }));
            }
            alphas.push(a);
        }
        let ks = key_lemma_step_with(self.c, &self.x, &self.ys, &alphas, &self.params.witness, self.exec)?;
        let x = ks.pivot;
        let l = ks.colour;
        let (kind, pivot, chosen) = if ks.lambda <= self.params.lambda0 {
            let counts: Vec<usize> = (0..r)
                .map(|j| self.c.nbhd_unchecked(x, j).intersection_len(&ks.x_prime))
                .collect();
            let j = (0..r).fold(0, |acc, j| if counts[j] > counts[acc] { j } else { acc });
            debug_assert!(counts[j] * r + 1 >= ks.x_prime.len());
            self.x = self.c.nbhd_unchecked(x, j).intersection(&ks.x_prime);
            self.ys[j] = ks.y_primes[j].clone();
            self.ts[j].insert(x);
            (StepKind::Colour, Some(x), Some(j))
        } else {
            self.x = ks.x_prime.clone();
            self.ys[l] = ks.y_primes[l].clone();
            (StepKind::Boost, None, None)
        };
        let densities = if self.x.is_empty() {
            None
        } else {
            Some(
                (0..r)
                    .map(|i| min_density(self.c, &self.x, &self.ys[i], i))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        self.steps.push(StepRecord {
            s: self.steps.len() + 1,
            kind,
            pivot,
            colour: l,
            chosen,
            lambda: ks.lambda,
            q: ks.witness.q,
            x_prime: ks.x_prime.len(),
            sizes: sizes(&self.x, &self.ys, &self.ts),
            densities,
        });
        Ok(self.finished())
    }

    pub fn into_outcome(self, result: Outcome) -> Result<EngineOutcome> {
        if let Outcome::BookFound { colour, spine, pages } = &result {
            if !self.c.is_mono_book(spine, pages, *colour)? {
                return Err(Error::violation(
                    "book algorithm",
                    format!("final spine {spine:?} and pages do not form a book in colour {colour}"),
                ));
            }
        }
        Ok(EngineOutcome {
            result,
            trace: Trace {
                header: self.header,
                steps: self.steps,
            },
        })
    }
}

fn sizes(x: &VertexSet, ys: &[VertexSet], ts: &[VertexSet]) -> Sizes {
    Sizes {
        x: x.len(),
        y: ys.iter().map(VertexSet::len).collect(),
        t: ts.iter().map(VertexSet::len).collect(),
    }
}

/// Runs the algorithm to completion.
pub fn run(c: &EdgeColouring, x: &VertexSet, ys: &[VertexSet], params: &EngineParams) -> Result<EngineOutcome> {
    run_with(c, x, ys, params, Exec::default())
}

pub fn run_with(
    c: &EdgeColouring,
    x: &VertexSet,
    ys: &[VertexSet],
    params: &EngineParams,
    exec: Exec,
) -> Result<EngineOutcome> {
    let mut engine = Engine::new(c, x, ys, params, exec)?;
    loop {
        if let Some(done) = engine.step()? {
            return engine.into_outcome(done);
        }
    }
}

// ---------------------------------------------------------------------------
// Monitors

/// Result of replaying one lemma over a trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorReport {
    pub lemma: String,
    /// Number of (step, colour) instances checked.
    pub checked: usize,
    /// Why the lemma does not apply, when it was skipped.
    pub skipped: Option<String>,
}

impl MonitorReport {
    fn ran(lemma: &str, checked: usize) -> Self {
        MonitorReport {
            lemma: lemma.into(),
            checked,
            skipped: None,
        }
    }

    fn skip(lemma: &str, why: impl Into<String>) -> Self {
        MonitorReport {
            lemma: lemma.into(),
            checked: 0,
            skipped: Some(why.into()),
        }
    }
}

/// One instant `s` of a trace: state after `s` rounds (`s = 0` is the start).
struct Instant<'a> {
    s: usize,
    x: usize,
    y: &'a [usize],
    densities: Option<&'a [Rational]>,
    /// `λ` of every boost step so far, with its colour.
    boosts: Vec<(usize, &'a Rational)>,
}

fn instants(trace: &Trace) -> Vec<Instant<'_>> {
    let h = &trace.header;
    let mut out = vec![Instant {
        s: 0,
        x: h.initial_sizes.x,
        y: &h.initial_sizes.y,
        densities: Some(&h.initial_densities),
        boosts: Vec::new(),
    }];
    let mut boosts = Vec::new();
    for rec in &trace.steps {
        if rec.kind == StepKind::Boost {
            boosts.push((rec.colour, &rec.lambda));
        }
        out.push(Instant {
            s: rec.s,
            x: rec.sizes.x,
            y: &rec.sizes.y,
            densities: rec.densities.as_deref(),
            boosts: boosts.clone(),
        });
    }
    out
}

fn violation(
    lemma: &str,
    s: usize,
    i: Option<usize>,
    lhs: impl std::fmt::Display,
    rhs: impl std::fmt::Display,
) -> Error {
    let at = match i {
        Some(i) => format!("step {s}, colour {i}"),
        None => format!("step {s}"),
    };
    Error::violation(lemma, format!("{at}: {lhs} < {rhs}"))
}

/// `p_i(s) − p_0 + δ >= δ (1 − 1/t)^t Π_{j ∈ B_i(s)} (1 + λ(j)/t)`.
pub fn check_lemma_41(trace: &Trace) -> Result<MonitorReport> {
    const NAME: &str = "density growth";
    let h = &trace.header;
    let prm = &h.params;
    let t = int(prm.t as i64);
    let base = &prm.delta * powi(&(Rational::one() - t.recip()), prm.t as i64);
    let mut checked = 0;
    for inst in instants(trace) {
        let Some(dens) = inst.densities else { continue };
        for (i, p) in dens.iter().enumerate() {
            let rhs = inst
                .boosts
                .iter()
                .filter(|(c, _)| *c == i)
                .fold(base.clone(), |acc, (_, l)| acc * (Rational::one() + *l / &t));
            let lhs = p - &h.p0 + &prm.delta;
            if lhs < rhs {
                return Err(violation(NAME, inst.s, Some(i), lhs, rhs));
            }
            checked += 1;
        }
    }
    Ok(MonitorReport::ran(NAME, checked))
}

/// `p_i(s) >= p_0 − 3δ/4` and `α_i(s) >= δ/4t`, for `t >= 2`.
pub fn check_lemma_42(trace: &Trace) -> Result<MonitorReport> {
    const NAME: &str = "density floor";
    let h = &trace.header;
    let prm = &h.params;
    if prm.t < 2 {
        return Ok(MonitorReport::skip(NAME, "needs t >= 2"));
    }
    if prm.lambda0.is_negative() {
        return Ok(MonitorReport::skip(NAME, "needs lambda_0 >= 0"));
    }
    let p_floor = &h.p0 - rat(3, 4) * &prm.delta;
    let a_floor = &prm.delta / int(4 * prm.t as i64);
    let mut checked = 0;
    for inst in instants(trace) {
        let Some(dens) = inst.densities else { continue };
        for (i, p) in dens.iter().enumerate() {
            if *p < p_floor {
                return Err(violation(NAME, inst.s, Some(i), p, &p_floor));
            }
            let a = prm.alpha(p, &h.p0);
            if a < a_floor {
                return Err(violation(NAME, inst.s, Some(i), a, &a_floor));
            }
            checked += 1;
        }
    }
    Ok(MonitorReport::ran(NAME, checked))
}

fn ln_inv_delta(delta: &Rational) -> Interval {
    rational_or_zero(&delta.recip()).ln()
}

/// `|B_i(s)| <= (4 log(1/δ)/λ_0) t`, for `t >= λ_0 > 0` and `δ <= 1/4`.
pub fn check_lemma_43(trace: &Trace) -> Result<MonitorReport> {
    const NAME: &str = "boost count";
    let prm = &trace.header.params;
    let t = int(prm.t as i64);
    if !prm.lambda0.is_positive() || t < prm.lambda0 || prm.delta > rat(1, 4) {
        return Ok(MonitorReport::skip(NAME, "needs t >= lambda_0 > 0 and delta <= 1/4"));
    }
    let bound = ln_inv_delta(&prm.delta)
        .mul_u64(4 * prm.t as u64)
        .div(&rational_or_zero(&prm.lambda0));
    let mut checked = 0;
    for inst in instants(trace) {
        for i in 0..prm.r {
            let b = inst.boosts.iter().filter(|(c, _)| *c == i).count();
            if !Interval::from_u64(b as u64).certainly_le(&bound) {
                return Err(violation(
                    NAME,
                    inst.s,
                    Some(i),
                    format!("bound {:.6}", bound.to_f64()),
                    b,
                ));
            }
            checked += 1;
        }
    }
    Ok(MonitorReport::ran(NAME, checked))
}

/// `|Y_i(s)| >= (p_0 − 3δ/4)^{t + |B_i(s)|} |Y_i(0)|`, for `t >= 2` and `p_0 > 3δ/4`.
pub fn check_lemma_44(trace: &Trace) -> Result<MonitorReport> {
    const NAME: &str = "page reservoir size";
    let h = &trace.header;
    let prm = &h.params;
    let base = &h.p0 - rat(3, 4) * &prm.delta;
    if prm.t < 2 || !base.is_positive() {
        return Ok(MonitorReport::skip(NAME, "needs t >= 2 and p_0 > 3 delta/4"));
    }
    if prm.lambda0.is_negative() {
        return Ok(MonitorReport::skip(NAME, "needs lambda_0 >= 0"));
    }
    let mut checked = 0;
    for inst in instants(trace) {
        for i in 0..prm.r {
            let b = inst.boosts.iter().filter(|(c, _)| *c == i).count();
            let rhs = powi(&base, (prm.t + b) as i64) * int(h.initial_sizes.y[i] as i64);
            let lhs = int(inst.y[i] as i64);
            if lhs < rhs {
                return Err(violation(NAME, inst.s, Some(i), lhs, rhs));
            }
            checked += 1;
        }
    }
    Ok(MonitorReport::ran(NAME, checked))
}

/// Reservoir bound
/// `|X(s)| >= ε^{rt + |B(s)|} exp(−C Σ_{j ∈ B(s)} √(λ(j)+1)) |X(0)| − rt`
/// with `ε = (β/r) e^{−C√(λ_0+1)}`, and, when `t >= λ_0/δ > 0` and `δ <= 1/4`,
/// `Σ_{j ∈ B(s)} √λ(j) <= (7r log(1/δ)/√λ_0) t`.
pub fn check_lemma_45_46(trace: &Trace) -> Result<Vec<MonitorReport>> {
    const N45: &str = "reservoir size";
    const N46: &str = "boost lambda sum";
    let h = &trace.header;
    let prm = &h.params;
    let r = prm.r as u64;
    let t = prm.t as u64;
    let c = prm.witness.c();
    let one = Rational::one();
    let sqrt1 = |l: &Rational| rational_or_zero(&(l + &one)).sqrt();
    let ln_eps = rational_or_zero(&(&prm.witness.beta / int(r as i64)))
        .ln()
        .sub(&c.mul(&sqrt1(&prm.lambda0)));
    let x0 = Interval::from_u64(h.initial_sizes.x as u64);

    let applies46 = prm.lambda0.is_positive() && prm.delta <= rat(1, 4) && int(t as i64) >= &prm.lambda0 / &prm.delta;
    let bound46 = applies46.then(|| {
        ln_inv_delta(&prm.delta)
            .mul_u64(7 * r * t)
            .div(&rational_or_zero(&prm.lambda0).sqrt())
    });

    let mut checked = 0;
    for inst in instants(trace) {
        let b = inst.boosts.len() as u64;
        let sum = inst
            .boosts
            .iter()
            .fold(Interval::zero(), |acc, (_, l)| acc.add(&sqrt1(l)));
        let log_factor = ln_eps.mul_u64(r * t + b).sub(&c.mul(&sum));
        let rhs = log_factor.exp().mul(&x0).sub(&Interval::from_u64(r * t));
        if !Interval::from_u64(inst.x as u64).certainly_ge(&rhs) {
            return Err(violation(N45, inst.s, None, inst.x, format!("{:.6e}", rhs.to_f64())));
        }
        if let Some(bound) = &bound46 {
            let lhs = inst
                .boosts
                .iter()
                .fold(Interval::zero(), |acc, (_, l)| acc.add(&rational_or_zero(l).sqrt()));
            if !lhs.certainly_le(bound) {
                return Err(violation(
                    N46,
                    inst.s,
                    None,
                    format!("bound {:.6}", bound.to_f64()),
                    format!("{:.6}", lhs.to_f64()),
                ));
            }
        }
        checked += 1;
    }
    let r46 = if applies46 {
        MonitorReport::ran(N46, checked)
    } else {
        MonitorReport::skip(N46, "needs t >= lambda_0/delta > 0 and delta <= 1/4")
    };
    Ok(vec![MonitorReport::ran(N45, checked), r46])
}

/// Every monitor, in order.
pub fn check_all(trace: &Trace) -> Result<Vec<MonitorReport>> {
    let mut out = vec![
        check_lemma_41(trace)?,
        check_lemma_42(trace)?,
        check_lemma_43(trace)?,
        check_lemma_44(trace)?,
    ];
    out.extend(check_lemma_45_46(trace)?);
    Ok(out)
}

/// Checks the structural invariants of a live engine against the colouring.
pub fn check_state(c: &EdgeColouring, e: &Engine<'_>) -> Result<()> {
    let fail = |m: String| Err(Error::violation("engine state", m));
    for (i, t) in e.ts.iter().enumerate() {
        if !c.is_mono_clique(t, i) {
            return fail(format!("T_{i} is not a clique in colour {i}"));
        }
        if !t.is_disjoint(&e.x) {
            return fail(format!("X meets T_{i}"));
        }
        for u in t.iter() {
            if !e.ys[i].is_subset(c.neighbourhood(u, i)?) {
                return fail(format!("Y_{i} leaves N_{i}({u})"));
            }
            for j in 0..c.r() {
                if e.ts[j].contains(u) && !e.x.is_subset(c.neighbourhood(u, j)?) {
                    return fail(format!("X leaves N_{j}({u})"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_sets(c: &EdgeColouring) -> (VertexSet, Vec<VertexSet>) {
        let v = c.vertices();
        (v.clone(), vec![v; c.r()])
    }

    #[test]
    fn pentagon_single_colour_step() {
        let c = EdgeColouring::pentagon();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 1, int(1000), rat(1, 8)).unwrap();
        let out = run(&c, &x, &ys, &prm).unwrap();
        match &out.result {
            Outcome::BookFound { colour, spine, pages } => {
                assert_eq!(spine.len(), 1);
                assert!(c.is_mono_book(spine, pages, *colour).unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(out.trace.steps.len(), 1);
        assert_eq!(out.trace.steps[0].kind, StepKind::Colour);
        check_all(&out.trace).unwrap();
    }

    #[test]
    fn singleton_reservoir() {
        let c = crate::random_colouring(12, 2, 3).unwrap();
        let x = VertexSet::from_vertices(12, [5]);
        let ys = vec![c.vertices(); 2];
        let prm = EngineParams::new(2, 1, int(100), rat(1, 8)).unwrap();
        let out = run(&c, &x, &ys, &prm).unwrap();
        let Outcome::BookFound { spine, colour, pages } = out.result else {
            panic!("expected a book")
        };
        assert_eq!(spine.to_vec(), vec![5]);
        assert!(pages.is_subset(c.neighbourhood(5, colour).unwrap()));
    }

    #[test]
    fn random_run_passes_monitors_and_state_checks() {
        let c = crate::random_colouring(60, 2, 7).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 3, int(10), rat(1, 16)).unwrap();
        let mut e = Engine::new(&c, &x, &ys, &prm, Exec::default()).unwrap();
        let done = loop {
            check_state(&c, &e).unwrap();
            if let Some(o) = e.step().unwrap() {
                break o;
            }
        };
        check_state(&c, &e).unwrap();
        let out = e.into_outcome(done).unwrap();
        for rep in check_all(&out.trace).unwrap() {
            assert!(rep.skipped.is_some() || rep.checked > 0, "{rep:?}");
        }
        for rec in &out.trace.steps {
            assert_eq!(rec.kind == StepKind::Colour, rec.lambda <= prm.lambda0);
        }
    }

    #[test]
    fn boosts_and_all_monitors_apply_with_small_threshold() {
        let c = crate::random_colouring(80, 2, 21).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 4, rat(1, 2), rat(1, 4)).unwrap();
        let out = run(&c, &x, &ys, &prm).unwrap();
        let reps = check_all(&out.trace).unwrap();
        assert!(reps.iter().all(|r| r.skipped.is_none()), "{reps:?}");
    }

    #[test]
    fn trace_round_trip_and_determinism() {
        let c = crate::random_colouring(40, 3, 5).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(3, 2, int(5), rat(1, 8)).unwrap();
        let a = run_with(&c, &x, &ys, &prm, Exec::Sequential).unwrap().trace;
        let b = run_with(&c, &x, &ys, &prm, Exec::Parallel).unwrap().trace;
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(Trace::from_jsonl(&a.to_jsonl()).unwrap(), a);
        assert!(Trace::from_jsonl("{\"type\":\"step\"}").is_err());
    }

    #[test]
    fn fabricated_violations_are_caught() {
        let c = crate::random_colouring(50, 2, 9).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 3, int(10), rat(1, 16)).unwrap();
        let trace = run(&c, &x, &ys, &prm).unwrap().trace;
        check_all(&trace).unwrap();

        let mut bad = trace.clone();
        bad.header.initial_densities[0] = &bad.header.p0 - int(1);
        assert!(matches!(check_lemma_41(&bad), Err(Error::LemmaViolation { .. })));
        assert!(matches!(check_lemma_42(&bad), Err(Error::LemmaViolation { .. })));

        let mut bad = trace.clone();
        bad.steps[0].sizes.y[1] = 0;
        assert!(matches!(check_lemma_44(&bad), Err(Error::LemmaViolation { .. })));

        let mut bad = trace.clone();
        bad.header.params.lambda0 = int(2);
        bad.header.params.delta = rat(1, 4);
        for s in bad.steps.iter_mut() {
            s.kind = StepKind::Boost;
        }
        while bad.steps.len() < 40 {
            let mut extra = bad.steps[0].clone();
            extra.s = bad.steps.len() + 1;
            bad.steps.push(extra);
        }
        assert!(matches!(check_lemma_43(&bad), Err(Error::LemmaViolation { .. })));

        let mut bad = trace.clone();
        bad.header.initial_sizes.x = 1 << 60;
        bad.header.params.witness.beta = int(1);
        bad.header.params.witness.c_squared = rat(1, 1 << 40);
        bad.header.params.lambda0 = int(-1);
        assert!(matches!(check_lemma_45_46(&bad), Err(Error::LemmaViolation { .. })));
    }

    #[test]
    fn initial_state_trivialities() {
        let c = crate::random_colouring(30, 2, 2).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 2, int(5), rat(1, 8)).unwrap();
        let e = Engine::new(&c, &x, &ys, &prm, Exec::default()).unwrap();
        let empty = e.into_outcome(Outcome::ReservoirExhausted).unwrap().trace;
        assert_eq!(check_lemma_41(&empty).unwrap().checked, 2);
        assert_eq!(check_lemma_44(&empty).unwrap().checked, 2);
        assert_eq!(check_lemma_45_46(&empty).unwrap()[0].checked, 1);
    }

    #[test]
    fn params_validation_and_defaults() {
        assert!(EngineParams::new(2, 0, int(1), rat(1, 8)).is_err());
        assert!(EngineParams::new(2, 1, int(-2), rat(1, 8)).is_err());
        assert!(EngineParams::new(2, 1, int(1), rat(1, 3)).is_err());
        let p = EngineParams::from_mu(2, 10, &int(8192), &rat(1, 2)).unwrap();
        assert_eq!(p.delta, rat(1, 2 * 8192 * 8192));
        // (mu ln(1/delta) / (8 * 4 * 2^{3/2}))^2
        let want = (8192.0 * (2.0f64 * 8192.0 * 8192.0).ln() / (32.0 * 2f64.powf(1.5))).powi(2);
        assert!((exact::to_f64(&p.lambda0) / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_start_is_rejected() {
        let c = EdgeColouring::monochromatic(5, 2, 0).unwrap();
        let (x, ys) = all_sets(&c);
        let prm = EngineParams::new(2, 2, int(5), rat(1, 8)).unwrap();
        assert_eq!(
            run(&c, &x, &ys, &prm).unwrap_err(),
            Error::DegenerateDensity { colour: 1 }
        );
    }
}
