//! Codegree geometry behind the key lemma.
//!
//! Each colour `i` maps `x ∈ X` to the centred, scaled indicator
//! `σ_i(x) = (1_{N′_i(x)} − p_i 1_{Y_i}) / √(α_i p_i |Y_i|)`, where `N′_i(x)` is
//! the `p_i |Y_i|` smallest vertices of `N_i(x) ∩ Y_i`. Vectors are never
//! materialised: inner products follow exactly from codegrees, and every
//! threshold on an inner product becomes an integer threshold on a codegree.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::colouring::EdgeColouring;
use crate::error::{Error, Result};
use crate::exact::{self, int, powi, Rational};
use crate::par::Exec;
use crate::real::{rational_or_zero, Interval};
use crate::vertex_set::VertexSet;

/// `p_i(X, Y) = min_{x ∈ X} |N_i(x) ∩ Y| / |Y|`.
pub fn min_density(c: &EdgeColouring, x: &VertexSet, y: &VertexSet, i: usize) -> Result<Rational> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet);
    }
    check_sets(c, &[x, y])?;
    c.neighbourhood(0, i)?;
    let min = x
        .iter()
        .map(|v| c.nbhd_unchecked(v, i).intersection_len(y))
        .min()
        .unwrap();
    Ok(BigRational::new(min.into(), y.len().into()))
}

fn check_sets(c: &EdgeColouring, sets: &[&VertexSet]) -> Result<()> {
    for s in sets {
        if s.universe() != c.n() {
            return Err(Error::InvalidInput(format!(
                "vertex set over universe {} used with a colouring on {} vertices",
                s.universe(),
                c.n()
            )));
        }
    }
    Ok(())
}

/// Implicit `σ`-embedding of a reservoir `X` against sets `Y_1, …, Y_r`.
#[derive(Clone, Debug)]
pub struct Embedding {
    n: usize,
    xs: Vec<usize>,
    pos: Vec<Option<usize>>,
    ys: Vec<VertexSet>,
    m: Vec<usize>,
    p: Vec<Rational>,
    alpha: Vec<Rational>,
    trimmed: Vec<Vec<VertexSet>>,
}

pub fn build_embedding(c: &EdgeColouring, x: &VertexSet, ys: &[VertexSet], alphas: &[Rational]) -> Result<Embedding> {
    build_embedding_with(c, x, ys, alphas, Exec::default())
}

pub fn build_embedding_with(
    c: &EdgeColouring,
    x: &VertexSet,
    ys: &[VertexSet],
    alphas: &[Rational],
    exec: Exec,
) -> Result<Embedding> {
    let r = c.r();
    if ys.len() != r || alphas.len() != r {
        return Err(Error::InvalidInput(format!(
            "expected {r} sets and {r} alphas, got {} and {}",
            ys.len(),
            alphas.len()
        )));
    }
    if x.is_empty() || ys.iter().any(VertexSet::is_empty) {
        return Err(Error::EmptySet);
    }
    check_sets(c, &[x])?;
    check_sets(c, &ys.iter().collect::<Vec<_>>())?;
    if let Some(i) = alphas.iter().position(|a| !a.is_positive()) {
        return Err(Error::InvalidInput(format!("alpha_{i} must be positive")));
    }

    let xs = x.to_vec();
    let mut pos = vec![None; c.n()];
    for (a, &v) in xs.iter().enumerate() {
        pos[v] = Some(a);
    }
    let mut m = Vec::with_capacity(r);
    let mut p = Vec::with_capacity(r);
    let mut trimmed = Vec::with_capacity(r);
    for (i, y) in ys.iter().enumerate() {
        let full: Vec<VertexSet> = exec.map_slice(&xs, |&v| c.nbhd_unchecked(v, i).intersection(y));
        let mi = full.iter().map(VertexSet::len).min().unwrap();
        if mi == 0 {
            return Err(Error::DegenerateDensity { colour: i });
        }
        trimmed.push(exec.map_slice(&full, |s| s.smallest(mi)));
        p.push(BigRational::new(mi.into(), y.len().into()));
        m.push(mi);
    }
    Ok(Embedding {
        n: c.n(),
        xs,
        pos,
        ys: ys.to_vec(),
        m,
        p,
        alpha: alphas.to_vec(),
        trimmed,
    })
}

impl Embedding {
    pub fn r(&self) -> usize {
        self.p.len()
    }

    /// Members of `X` in increasing order.
    pub fn points(&self) -> &[usize] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn density(&self, i: usize) -> &Rational {
        &self.p[i]
    }

    pub fn densities(&self) -> &[Rational] {
        &self.p
    }

    pub fn alpha(&self, i: usize) -> &Rational {
        &self.alpha[i]
    }

    /// `p_i |Y_i|`, the common size of every `N′_i(x)`.
    pub fn trimmed_size(&self, i: usize) -> usize {
        self.m[i]
    }

    pub fn y(&self, i: usize) -> &VertexSet {
        &self.ys[i]
    }

    /// `N′_i(x)`.
    pub fn trimmed(&self, i: usize, x: usize) -> Result<&VertexSet> {
        Ok(&self.trimmed[i][self.index(x)?])
    }

    fn index(&self, x: usize) -> Result<usize> {
        self.pos
            .get(x)
            .copied()
            .flatten()
            .ok_or(Error::InvalidVertex { vertex: x, n: self.n })
    }

    fn codegree_idx(&self, i: usize, a: usize, b: usize) -> usize {
        self.trimmed[i][a].intersection_len(&self.trimmed[i][b])
    }

    /// `|N′_i(x) ∩ N′_i(y)|`.
    pub fn codegree(&self, i: usize, x: usize, y: usize) -> Result<usize> {
        Ok(self.codegree_idx(i, self.index(x)?, self.index(y)?))
    }

    /// The inner product carried by codegree `c` in colour `i`:
    /// `(c − p_i² |Y_i|) / (α_i p_i |Y_i|)`.
    pub fn inner_from_codegree(&self, i: usize, c: usize) -> Rational {
        let m = int(self.m[i] as i64);
        (int(c as i64) - &self.p[i] * &m) / (&self.alpha[i] * &m)
    }

    /// `⟨σ_i(x), σ_i(y)⟩`, exactly.
    pub fn inner_product(&self, i: usize, x: usize, y: usize) -> Result<Rational> {
        Ok(self.inner_from_codegree(i, self.codegree(i, x, y)?))
    }

    /// Least codegree `c` with inner product `>= λ`, i.e. `⌈(p_i + λα_i) p_i |Y_i|⌉`.
    pub fn codegree_threshold(&self, i: usize, lambda: &Rational) -> i64 {
        let v = (&self.p[i] + lambda * &self.alpha[i]) * int(self.m[i] as i64);
        exact::ceil(&v).to_i64().unwrap_or(i64::MAX)
    }

    /// Self inner product `(1 − p_i)/α_i`.
    pub fn norm_sq(&self, i: usize) -> Rational {
        (Rational::one() - &self.p[i]) / &self.alpha[i]
    }

    /// Row-major codegree matrices over `X × X`, one per colour.
    pub fn codegrees(&self, exec: Exec) -> Codegrees {
        let k = self.len();
        let rows: Vec<Vec<Vec<u32>>> = exec.map_range(k, |a| {
            (0..self.r())
                .map(|i| (0..k).map(|b| self.codegree_idx(i, a, b) as u32).collect())
                .collect()
        });
        let mut data = vec![Vec::with_capacity(k * k); self.r()];
        for row in rows {
            for (i, vals) in row.into_iter().enumerate() {
                data[i].extend(vals);
            }
        }
        Codegrees { k, data }
    }

    /// The unscaled vectors `1_{N′_i(x)} − p_i 1_{Y_i}` in coordinates indexed
    /// by `Y_i`, with per-colour inner-product scale `1/(α_i p_i |Y_i|)`.
    pub fn vector_family(&self) -> VectorFamily {
        let r = self.r();
        let dims: Vec<usize> = self.ys.iter().map(VertexSet::len).collect();
        let scales = (0..r)
            .map(|i| (&self.alpha[i] * int(self.m[i] as i64)).recip())
            .collect();
        let points = (0..self.len())
            .map(|a| {
                (0..r)
                    .map(|i| {
                        self.ys[i]
                            .iter()
                            .map(|v| {
                                let ind = if self.trimmed[i][a].contains(v) { int(1) } else { int(0) };
                                ind - &self.p[i]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        VectorFamily { dims, scales, points }
    }
}

/// Codegree matrices; entry `(a, b)` refers to the `a`-th and `b`-th members of `X`.
#[derive(Clone, Debug)]
pub struct Codegrees {
    k: usize,
    data: Vec<Vec<u32>>,
}

impl Codegrees {
    #[inline]
    pub fn get(&self, i: usize, a: usize, b: usize) -> u32 {
        self.data[i][a * self.k + b]
    }

    pub fn size(&self) -> usize {
        self.k
    }
}

// ---------------------------------------------------------------------------
// Witness search

/// `β` and `C²` for the witness bound `β e^{−C√(λ+1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    #[serde(with = "exact::string")]
    pub beta: Rational,
    #[serde(with = "exact::string")]
    pub c_squared: Rational,
}

impl WitnessParams {
    /// `β = 3^{−4r}`, `C = 4 r^{3/2}`.
    pub fn standard(r: usize) -> Self {
        WitnessParams {
            beta: powi(&int(3), -4 * r as i64),
            c_squared: int(16) * powi(&int(r as i64), 3),
        }
    }

    /// Enclosure of `C`.
    pub fn c(&self) -> Interval {
        rational_or_zero(&self.c_squared).sqrt()
    }

    /// Enclosure of `β e^{−C√(λ+1)}`.
    pub fn bound(&self, lambda: &Rational) -> Interval {
        let arg = &self.c_squared * (lambda + Rational::one());
        let e = rational_or_zero(&arg).sqrt().neg().exp();
        rational_or_zero(&self.beta).mul(&e)
    }

    /// Certified `q >= β e^{−C√(λ+1)}`.
    pub fn accepts(&self, q: &Rational, lambda: &Rational) -> bool {
        rational_or_zero(q).certainly_ge(&self.bound(lambda))
    }
}

/// A colour `ℓ` and threshold `λ` whose joint pair event is likely enough.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub colour: usize,
    #[serde(with = "exact::string")]
    pub lambda: Rational,
    /// Probability of the event over ordered pairs of `X`, diagonal included.
    #[serde(with = "exact::string")]
    pub q: Rational,
    /// Pairs satisfying the event.
    pub pairs: u64,
    /// Midpoint of the required bound `β e^{−C√(λ+1)}`.
    pub bound: f64,
}

pub fn find_lambda_witness(e: &Embedding, params: &WitnessParams) -> Result<WitnessReport> {
    find_lambda_witness_with(e, params, &e.codegrees(Exec::default()))
}

/// Witness search against precomputed codegrees.
///
/// Candidates are `−1` and every inner-product value attained in colour `ℓ`
/// by a pair meeting the `−1` thresholds in all other colours. The largest
/// accepted `λ` wins; ties go to the smallest colour.
pub fn find_lambda_witness_with(e: &Embedding, params: &WitnessParams, cg: &Codegrees) -> Result<WitnessReport> {
    let r = e.r();
    let k = e.len();
    let total = (k * k) as u64;
    let minus_one = -Rational::one();
    let floor: Vec<i64> = (0..r).map(|i| e.codegree_threshold(i, &minus_one)).collect();
    let ok = |i: usize, a: usize, b: usize| cg.get(i, a, b) as i64 >= floor[i];

    let mut best: Option<WitnessReport> = None;
    for l in 0..r {
        let mut hist = vec![0u64; e.trimmed_size(l) + 1];
        for a in 0..k {
            for b in 0..k {
                if (0..r).all(|j| j == l || ok(j, a, b)) && ok(l, a, b) {
                    hist[cg.get(l, a, b) as usize] += 1;
                }
            }
        }
        let mut found = None;
        let mut cum = 0u64;
        for c in (0..hist.len()).rev() {
            if hist[c] == 0 {
                continue;
            }
            cum += hist[c];
            let lambda = e.inner_from_codegree(l, c);
            if let Some(b) = &best {
                if lambda <= b.lambda {
                    break;
                }
            }
            let q = BigRational::new(cum.into(), total.into());
            if params.accepts(&q, &lambda) {
                found = Some((lambda, q, cum));
                break;
            }
        }
        if found.is_none() && best.is_none() {
            let q = BigRational::new(cum.into(), total.into());
            if params.accepts(&q, &minus_one) {
                found = Some((minus_one.clone(), q, cum));
            }
        }
        if let Some((lambda, q, pairs)) = found {
            if best.as_ref().is_none_or(|b| lambda > b.lambda) {
                best = Some(WitnessReport {
                    colour: l,
                    bound: params.bound(&lambda).to_f64(),
                    lambda,
                    q,
                    pairs,
                });
            }
        }
    }
    best.ok_or_else(|| {
        Error::violation(
            "lambda witness",
            format!("no colour and threshold reach the bound on |X| = {k}"),
        )
    })
}

/// Exhaustive recount of a witness report against the embedding.
pub fn recount_witness(e: &Embedding, params: &WitnessParams, w: &WitnessReport) -> Result<()> {
    let xs = e.points();
    let minus_one = -Rational::one();
    let mut hits = 0u64;
    for &x in xs {
        for &y in xs {
            let mut event = e.inner_product(w.colour, x, y)? >= w.lambda;
            for j in 0..e.r() {
                if event && j != w.colour {
                    event = e.inner_product(j, x, y)? >= minus_one;
                }
            }
            hits += event as u64;
        }
    }
    let q = BigRational::new(hits.into(), ((xs.len() * xs.len()) as u64).into());
    if q != w.q || hits != w.pairs {
        return Err(Error::violation(
            "lambda witness",
            format!("reported q = {} but recount gives {}", w.q, q),
        ));
    }
    if w.lambda < minus_one || !params.accepts(&q, &w.lambda) {
        return Err(Error::violation(
            "lambda witness",
            format!("q = {q} below the bound at lambda = {}", w.lambda),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Key step

/// Outcome of one application of the key lemma.
#[derive(Clone, Debug, Serialize)]
pub struct KeyStepResult {
    pub pivot: usize,
    pub colour: usize,
    #[serde(with = "exact::string")]
    pub lambda: Rational,
    pub x_prime: VertexSet,
    pub y_primes: Vec<VertexSet>,
    pub witness: WitnessReport,
    /// The pivot itself meets the pair conditions, i.e. `(1 − p_ℓ)/α_ℓ >= λ`.
    pub pivot_qualifies: bool,
    #[serde(with = "exact::string_vec")]
    pub densities: Vec<Rational>,
}

pub fn key_lemma_step(
    c: &EdgeColouring,
    x: &VertexSet,
    ys: &[VertexSet],
    alphas: &[Rational],
    params: &WitnessParams,
) -> Result<KeyStepResult> {
    key_lemma_step_with(c, x, ys, alphas, params, Exec::default())
}

pub fn key_lemma_step_with(
    c: &EdgeColouring,
    x: &VertexSet,
    ys: &[VertexSet],
    alphas: &[Rational],
    params: &WitnessParams,
    exec: Exec,
) -> Result<KeyStepResult> {
    let e = build_embedding_with(c, x, ys, alphas, exec)?;
    let cg = e.codegrees(exec);
    let w = find_lambda_witness_with(&e, params, &cg)?;
    let r = e.r();
    let k = e.len();
    let l = w.colour;
    let minus_one = -Rational::one();
    let thr: Vec<i64> = (0..r)
        .map(|i| e.codegree_threshold(i, if i == l { &w.lambda } else { &minus_one }))
        .collect();

    let scores: Vec<usize> = exec.map_range(k, |a| {
        (0..k)
            .filter(|&b| b != a && (0..r).all(|i| cg.get(i, a, b) as i64 >= thr[i]))
            .count()
    });
    // first maximum in vertex order
    let best = (0..k).fold(0, |acc, a| if scores[a] > scores[acc] { a } else { acc });
    let pivot = e.points()[best];
    let x_prime = VertexSet::from_vertices(
        c.n(),
        (0..k)
            .filter(|&b| b != best && (0..r).all(|i| cg.get(i, best, b) as i64 >= thr[i]))
            .map(|b| e.points()[b]),
    );
    let y_primes = (0..r).map(|i| e.trimmed[i][best].clone()).collect();
    Ok(KeyStepResult {
        pivot,
        colour: l,
        pivot_qualifies: e.norm_sq(l) >= w.lambda,
        lambda: w.lambda.clone(),
        x_prime,
        y_primes,
        witness: w,
        densities: e.p.clone(),
    })
}

/// Recomputes every guarantee of a key step directly from the colouring.
///
/// The size bound `|X′| >= β e^{−C√(λ+1)} |X|` is checked on `X′ ∪ {x}` when
/// the pivot satisfies the pair conditions with itself, since `X′` never
/// contains the pivot.
pub fn verify_key_step(
    c: &EdgeColouring,
    x: &VertexSet,
    ys: &[VertexSet],
    alphas: &[Rational],
    params: &WitnessParams,
    res: &KeyStepResult,
) -> Result<()> {
    let fail = |msg: String| Err(Error::violation("key step", msg));
    let r = c.r();
    let l = res.colour;
    if !x.contains(res.pivot) || res.x_prime.contains(res.pivot) || !res.x_prime.is_subset(x) {
        return fail("pivot or X' not placed inside X correctly".into());
    }
    if res.lambda < -Rational::one() {
        return fail(format!("lambda = {} below -1", res.lambda));
    }
    let p = ys
        .iter()
        .enumerate()
        .map(|(i, y)| min_density(c, x, y, i))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..r {
        let yi = &res.y_primes[i];
        let want = &p[i] * int(ys[i].len() as i64);
        if int(yi.len() as i64) != want {
            return fail(format!("|Y'_{i}| = {} but p_i |Y_i| = {want}", yi.len()));
        }
        if !yi.is_subset(&c.neighbourhood(res.pivot, i)?.intersection(&ys[i])) {
            return fail(format!("Y'_{i} leaves N_{i}(x) ∩ Y_{i}"));
        }
    }

    let qualifies = (Rational::one() - &p[l]) / &alphas[l] >= res.lambda;
    let mut counted = res.x_prime.clone();
    if qualifies {
        counted.insert(res.pivot);
    }
    let size = int(counted.len() as i64);
    let needed = params.bound(&res.lambda).mul(&Interval::from_u64(x.len() as u64));
    if !rational_or_zero(&size).certainly_ge(&needed) {
        return fail(format!(
            "|X'| = {} below beta e^(-C sqrt(lambda+1)) |X| = {:.6}",
            counted.len(),
            needed.to_f64()
        ));
    }
    if res.x_prime.len() as i64 + 1 < ceil_i64(&(&res.witness.q * int(x.len() as i64))) {
        return fail("|X'| below q|X| - 1".into());
    }
    if counted.is_empty() {
        return Ok(());
    }
    for i in 0..r {
        let got = min_density(c, &counted, &res.y_primes[i], i)?;
        let want = if i == l {
            &p[i] + &res.lambda * &alphas[i]
        } else {
            &p[i] - &alphas[i]
        };
        if got < want {
            return fail(format!("p_{i}(X', Y'_{i}) = {got} below {want}"));
        }
    }
    Ok(())
}

fn ceil_i64(q: &Rational) -> i64 {
    exact::ceil(q).to_i64().unwrap_or(i64::MAX)
}

// ---------------------------------------------------------------------------
// Moments

/// Explicit vector family: `points[x][i]` is `σ_i(x)` up to the per-colour
/// inner-product scale `scales[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFamily {
    pub dims: Vec<usize>,
    pub scales: Vec<Rational>,
    pub points: Vec<Vec<Vec<Rational>>>,
}

impl VectorFamily {
    /// Unscaled family; every point must have one vector per colour of the
    /// matching dimension.
    pub fn new(points: Vec<Vec<Vec<Rational>>>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let dims: Vec<usize> = first.iter().map(Vec::len).collect();
        for pt in &points {
            if pt.len() != dims.len() || pt.iter().zip(&dims).any(|(v, &d)| v.len() != d) {
                return Err(Error::InvalidInput("ragged vector family".into()));
            }
        }
        Ok(VectorFamily {
            scales: vec![Rational::one(); dims.len()],
            dims,
            points,
        })
    }

    /// `size` points with entries `a/b`, `|a| <= 4`, `1 <= b <= 3`, drawn
    /// from a ChaCha8 stream.
    pub fn random(size: usize, dims: &[usize], seed: u64) -> Result<Self> {
        if size == 0 || dims.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..size)
            .map(|_| {
                dims.iter()
                    .map(|&d| {
                        (0..d)
                            .map(|_| exact::rat(rng.gen_range(-4..=4), rng.gen_range(1..=3)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(points)
    }

    pub fn r(&self) -> usize {
        self.dims.len()
    }

    pub fn inner(&self, i: usize, a: usize, b: usize) -> Rational {
        let dot = self.points[a][i]
            .iter()
            .zip(&self.points[b][i])
            .fold(Rational::zero(), |acc, (u, v)| acc + u * v);
        dot * &self.scales[i]
    }
}

fn check_exponents(r: usize, ls: &[u32]) -> Result<()> {
    if ls.len() != r {
        return Err(Error::InvalidInput(format!("expected {r} exponents, got {}", ls.len())));
    }
    Ok(())
}

fn moment_from_inner(k: usize, ls: &[u32], inner: impl Fn(usize, usize, usize) -> Rational) -> Rational {
    let mut sum = Rational::zero();
    for a in 0..k {
        for b in 0..k {
            let mut term = Rational::one();
            for (i, &l) in ls.iter().enumerate() {
                if l > 0 {
                    term *= powi(&inner(i, a, b), l as i64);
                }
            }
            sum += term;
        }
    }
    sum / int((k * k) as i64)
}

/// `E[Π_i ⟨σ_i(U), σ_i(U′)⟩^{ℓ_i}]` for `U, U′` i.i.d. uniform, by the double sum.
pub fn moment_double_sum(f: &VectorFamily, ls: &[u32]) -> Result<Rational> {
    check_exponents(f.r(), ls)?;
    let k = f.points.len();
    let grams: Vec<Vec<Rational>> = (0..f.r())
        .map(|i| {
            (0..k * k)
                .map(|ab| {
                    if ls[i] > 0 {
                        f.inner(i, ab / k, ab % k)
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    Ok(moment_from_inner(k, ls, |i, a, b| grams[i][a * k + b].clone()))
}

/// The same moment for an embedding, straight from codegrees.
pub fn moment_double_sum_embedding(e: &Embedding, ls: &[u32]) -> Result<Rational> {
    check_exponents(e.r(), ls)?;
    let cg = e.codegrees(Exec::default());
    Ok(moment_from_inner(e.len(), ls, |i, a, b| {
        e.inner_from_codegree(i, cg.get(i, a, b) as usize)
    }))
}

/// Size limits for the explicit tensor computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorCap {
    pub order: usize,
    pub dim: usize,
}

impl Default for TensorCap {
    fn default() -> Self {
        TensorCap { order: 4, dim: 32 }
    }
}

/// `⟨E[Z], E[Z]⟩` for `Z = ⊗_i σ_i(U)^{⊗ℓ_i}`, with `E[Z]` built as a dense tensor.
pub fn moment_tensor(f: &VectorFamily, ls: &[u32], cap: TensorCap) -> Result<Rational> {
    check_exponents(f.r(), ls)?;
    let factors: Vec<usize> = ls
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| std::iter::repeat_n(i, l as usize))
        .collect();
    let max_dim = factors.iter().map(|&i| f.dims[i]).max().unwrap_or(1);
    if factors.len() > cap.order || max_dim > cap.dim {
        return Err(Error::TensorTooLarge {
            order: factors.len(),
            dim: max_dim,
        });
    }
    let size: usize = factors.iter().map(|&i| f.dims[i]).product();
    let mut mean = vec![Rational::zero(); size];
    for pt in &f.points {
        let mut z = vec![Rational::one()];
        for &i in &factors {
            let v = &pt[i];
            z = z.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v;
        }
    }
    let k = int(f.points.len() as i64);
    let norm = mean.iter().fold(Rational::zero(), |acc, v| acc + v * v) / (&k * &k);
    let scale = factors.iter().fold(Rational::one(), |acc, &i| acc * &f.scales[i]);
    Ok(norm * scale)
}

// ---------------------------------------------------------------------------
// Special function

/// `cosh √x`, read as `cos √(−x)` for `x < 0`.
pub fn cosh_sqrt(x: &Interval) -> Interval {
    let pos = x.nonneg_part().map(|p| p.sqrt().cosh());
    let neg = x.nonpos_part().map(|n| n.neg().sqrt().cos());
    match (pos, neg) {
        (Some(a), Some(b)) => a.hull(&b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("an interval meets one side of zero"),
    }
}

/// `f(x_1, …, x_r) = Σ_j x_j Π_{i≠j} (2 + cosh √x_i)`.
pub fn special_f(xs: &[Interval]) -> Interval {
    let two = Interval::from_i64(2);
    let g: Vec<Interval> = xs.iter().map(|x| two.add(&cosh_sqrt(x))).collect();
    let mut sum = Interval::zero();
    for (j, xj) in xs.iter().enumerate() {
        let mut term = xj.clone();
        for (i, gi) in g.iter().enumerate() {
            if i != j {
                term = term.mul(gi);
            }
        }
        sum = sum.add(&term);
    }
    sum
}

/// `Σ_{n<terms} x^n / (2n)!`, the Taylor series of `cosh √x`.
pub fn cosh_sqrt_series(x: &Interval, terms: usize) -> Interval {
    let mut sum = Interval::zero();
    let mut power = Interval::one();
    let mut fact = Interval::one();
    for n in 0..terms {
        if n > 0 {
            power = power.mul(x);
            fact = fact.mul_u64(((2 * n - 1) * (2 * n)) as u64);
        }
        sum = sum.add(&power.div(&fact));
    }
    sum
}

/// `f` with each `cosh √x_i` replaced by its truncated series.
pub fn special_f_series(xs: &[Interval], terms: usize) -> Interval {
    let two = Interval::from_i64(2);
    let g: Vec<Interval> = xs.iter().map(|x| two.add(&cosh_sqrt_series(x, terms))).collect();
    xs.iter().enumerate().fold(Interval::zero(), |acc, (j, xj)| {
        let term = g
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .fold(xj.clone(), |t, (_, gi)| t.mul(gi));
        acc.add(&term)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpecialBranch {
    UpperBoundHolds,
    NegativeCaseHolds,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecialCheck {
    pub branch: SpecialBranch,
    pub value: f64,
    pub bound: f64,
    /// Lower end of `bound − f`, so negative only on failure.
    pub margin: f64,
}

/// Verifies `f(xs) <= 3^r r exp(Σ √(x_i + 3r))` when every `x_i >= −3r`, and
/// `f(xs) <= −1` otherwise.
pub fn check_special_bounds(xs: &[Rational]) -> Result<SpecialCheck> {
    let r = xs.len();
    if r == 0 {
        return Err(Error::InvalidInput("special function needs r >= 1".into()));
    }
    let ivs: Vec<Interval> = xs.iter().map(rational_or_zero).collect();
    let f = special_f(&ivs);
    let three_r = int(3 * r as i64);
    let (branch, bound) = if xs.iter().all(|x| *x >= -three_r.clone()) {
        let exponent = xs.iter().fold(Interval::zero(), |acc, x| {
            acc.add(&rational_or_zero(&(x + &three_r)).sqrt())
        });
        let coeff = BigInt::from(3).pow(r as u32) * BigInt::from(r);
        let bound = Interval::from_bigint(&coeff).mul(&exponent.exp());
        (SpecialBranch::UpperBoundHolds, bound)
    } else {
        (SpecialBranch::NegativeCaseHolds, Interval::from_i64(-1))
    };
    let gap = bound.sub(&f);
    if !gap.certainly_nonneg() {
        return Err(Error::violation(
            "special function bound",
            format!("f = {:.6e} exceeds {:.6e} at {xs:?}", f.to_f64(), bound.to_f64()),
        ));
    }
    Ok(SpecialCheck {
        branch,
        value: f.to_f64(),
        bound: bound.to_f64(),
        margin: gap.lo_f64(),
    })
}
