//! Closed-form bounds: exact multinomials, log-space scalars, and certified
//! checks of the inequalities used to bound multicolour Ramsey numbers.
//!
//! Two tiers of arithmetic are used. Whenever both sides of an inequality are
//! rational it is decided exactly with `BigRational`. Otherwise both sides are
//! enclosed in [`Interval`]s of natural logarithms, and a check passes only if
//! the enclosures are separated, so rounding always works against the claim.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{int, powi, rat, Rational};
use crate::real::Interval;

/// Sign and natural-log magnitude of a real number.
#[derive(Clone, Debug)]
pub struct LogScalar {
    sign: i8,
    log_mag: Interval,
}

impl LogScalar {
    pub fn zero() -> Self {
        LogScalar {
            sign: 0,
            log_mag: Interval::zero(),
        }
    }

    pub fn one() -> Self {
        Self::from_log(Interval::zero())
    }

    /// The positive number `e^log`.
    pub fn from_log(log: Interval) -> Self {
        LogScalar { sign: 1, log_mag: log }
    }

    pub fn from_rational(q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        let sign = if q.is_negative() { -1 } else { 1 };
        let mag = q.abs();
        let log_mag = if mag.is_one() {
            Interval::zero()
        } else {
            Interval::from_rational(&mag).ln()
        };
        LogScalar { sign, log_mag }
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        if v.is_zero() {
            return Self::zero();
        }
        if v.is_one() {
            return Self::one();
        }
        Self::from_log(Interval::from_biguint(v).ln())
    }

    pub fn from_u64(v: u64) -> Self {
        Self::from_biguint(&BigUint::from(v))
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Enclosure of `ln |self|`; meaningless for zero.
    pub fn ln_abs(&self) -> &Interval {
        &self.log_mag
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        LogScalar {
            sign: self.sign * o.sign,
            log_mag: self.log_mag.add(&o.log_mag),
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        assert!(!o.is_zero(), "LogScalar division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        LogScalar {
            sign: self.sign * o.sign,
            log_mag: self.log_mag.sub(&o.log_mag),
        }
    }

    /// `self^e` for a positive base and a real exponent enclosure.
    pub fn pow(&self, e: &Interval) -> Self {
        assert!(self.sign > 0, "real power of a non-positive LogScalar");
        Self::from_log(self.log_mag.mul(e))
    }

    pub fn pow_rational(&self, e: &Rational) -> Self {
        if e.is_zero() {
            return Self::one();
        }
        self.pow(&Interval::from_rational(e))
    }

    /// Sum by log-sum-exp. Returns `None` when the signs differ and the
    /// magnitudes cannot be separated at the working precision.
    pub fn add(&self, o: &Self) -> Option<Self> {
        if self.is_zero() {
            return Some(o.clone());
        }
        if o.is_zero() {
            return Some(self.clone());
        }
        let (big, small) = if self.log_mag.cmp_mid(&o.log_mag).is_ge() {
            (self, o)
        } else {
            (o, self)
        };
        let d = small.log_mag.sub(&big.log_mag).exp();
        if big.sign == small.sign {
            let log = big.log_mag.add(&Interval::one().add(&d).ln());
            return Some(LogScalar {
                sign: big.sign,
                log_mag: log,
            });
        }
        if !small.log_mag.certainly_lt(&big.log_mag) {
            return None;
        }
        let factor = Interval::one().sub(&d);
        if !factor.lo().is_positive() {
            return None;
        }
        Some(LogScalar {
            sign: big.sign,
            log_mag: big.log_mag.add(&factor.ln()),
        })
    }

    /// Certified `self <= o`.
    pub fn certainly_le(&self, o: &Self) -> bool {
        match (self.sign, o.sign) {
            (s, t) if s < t => true,
            (s, t) if s > t => false,
            (0, 0) => true,
            (1, 1) => self.log_mag.certainly_le(&o.log_mag),
            _ => o.log_mag.certainly_le(&self.log_mag),
        }
    }

    pub fn certainly_ge(&self, o: &Self) -> bool {
        o.certainly_le(self)
    }

    /// `ln |self|` midpoint, `-inf` for zero.
    pub fn log_f64(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.log_mag.to_f64()
        }
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({:.6e})", if s < 0 { "-" } else { "" }, self.log_f64()),
        }
    }
}

/// Direction of a checked inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// One verified inequality `lhs (relation) rhs`.
///
/// `lhs_log` and `rhs_log` are natural logs of the two sides (`null` in JSON
/// when a side is not positive). `slack` is the log-gap in the direction of
/// the claim: positive when the inequality holds with room to spare.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub lhs_log: Option<f64>,
    pub rhs_log: Option<f64>,
    pub pass: bool,
    pub slack: Option<f64>,
    pub exact: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn ln_of_rational(q: &Rational) -> Option<f64> {
    q.is_positive()
        .then(|| LogScalar::from_rational(q).log_f64())
        .and_then(finite)
}

impl Check {
    /// Exact comparison of two rationals.
    pub fn exact(name: impl Into<String>, lhs: &Rational, relation: Relation, rhs: &Rational) -> Self {
        let pass = match relation {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
        };
        let (l, r) = (ln_of_rational(lhs), ln_of_rational(rhs));
        let slack = match (l, r) {
            (Some(l), Some(r)) => Some(match relation {
                Relation::Le => r - l,
                Relation::Ge => l - r,
            }),
            _ => None,
        };
        Check {
            name: name.into(),
            relation,
            lhs_log: l,
            rhs_log: r,
            pass,
            slack,
            exact: true,
        }
    }

    /// Certified comparison of two log-space values.
    pub fn log_space(name: impl Into<String>, lhs: &LogScalar, relation: Relation, rhs: &LogScalar) -> Self {
        let pass = match relation {
            Relation::Le => lhs.certainly_le(rhs),
            Relation::Ge => lhs.certainly_ge(rhs),
        };
        let l = (lhs.sign() > 0).then(|| lhs.log_f64()).and_then(finite);
        let r = (rhs.sign() > 0).then(|| rhs.log_f64()).and_then(finite);
        let slack = match (l, r) {
            (Some(l), Some(r)) => Some(match relation {
                Relation::Le => r - l,
                Relation::Ge => l - r,
            }),
            _ => None,
        };
        Check {
            name: name.into(),
            relation,
            lhs_log: l,
            rhs_log: r,
            pass,
            slack,
            exact: false,
        }
    }

    /// Certified comparison of two real enclosures that are already logarithms.
    pub fn of_logs(name: impl Into<String>, lhs_log: &Interval, relation: Relation, rhs_log: &Interval) -> Self {
        Self::log_space(
            name,
            &LogScalar::from_log(lhs_log.clone()),
            relation,
            &LogScalar::from_log(rhs_log.clone()),
        )
    }
}

// ---------------------------------------------------------------------------
// Multinomials

/// `(Σ ks)! / Π ks_i!`, computed as a product of binomials.
pub fn multinomial(ks: &[u64]) -> BigUint {
    let mut total = 0u64;
    let mut acc = BigUint::one();
    for &k in ks {
        total += k;
        acc *= binomial(total, k);
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Erdős–Szekeres upper bound for `R_r(k_1, …, k_r)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EsBound {
    /// `(Σ k_i choose k_1, …, k_r)`.
    #[serde(serialize_with = "decimal")]
    pub multinomial: BigUint,
    /// The crude form `r^{Σ k_i}`.
    #[serde(serialize_with = "decimal")]
    pub crude: BigUint,
}

fn decimal<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn es_upper(r: usize, ks: &[u64]) -> Result<EsBound> {
    if ks.len() != r || r == 0 {
        return Err(Error::InvalidInput(format!(
            "expected {r} clique sizes, got {}",
            ks.len()
        )));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidInput("clique sizes must be >= 1".into()));
    }
    let total: u64 = ks.iter().sum();
    Ok(EsBound {
        multinomial: multinomial(ks),
        crude: BigUint::from(r).pow(total as u32),
    })
}

// ---------------------------------------------------------------------------
// Multinomial tail bound

#[derive(Clone, Debug, Serialize)]
pub struct AppendixReport {
    pub k: u64,
    pub t: u64,
    pub r: u64,
    /// `(rk − t choose k, …, k, k − t)` as a decimal string.
    pub lhs: String,
    /// `lhs / (rk choose k, …, k) == Π_{i<t} (k−i)/(rk−i)`, checked exactly.
    pub product_identity: bool,
    /// The same ratio equals `r^{-t} Π_{i<t} (1 − (r−1)i/(rk−i))`.
    pub factored_identity: bool,
    pub bound: Check,
}

impl AppendixReport {
    pub fn pass(&self) -> bool {
        self.product_identity && self.factored_identity && self.bound.pass
    }
}

/// Checks `(rk−t choose k,…,k,k−t) <= e^{−(r−1)t²/3rk} r^{rk−t}` for `3 <= t <= k`.
pub fn appendix_check(k: u64, t: u64, r: u64) -> Result<AppendixReport> {
    if !(3 <= t && t <= k) || r == 0 {
        return Err(Error::InvalidInput(format!(
            "need 3 <= t <= k and r >= 1, got k={k}, t={t}, r={r}"
        )));
    }
    let mut parts = vec![k; r as usize];
    *parts.last_mut().unwrap() = k - t;
    let lhs = multinomial(&parts);
    let full = multinomial(&vec![k; r as usize]);

    let ratio = BigRational::new(BigInt::from(lhs.clone()), BigInt::from(full));
    let rk = r * k;
    let product: Rational = (0..t)
        .map(|i| rat((k - i) as i64, (rk - i) as i64))
        .fold(Rational::one(), |a, b| a * b);
    let factored: Rational = (0..t)
        .map(|i| int(1) - rat(((r - 1) * i) as i64, (rk - i) as i64))
        .fold(powi(&int(r as i64), -(t as i64)), |a, b| a * b);

    let exponent = rat(-(((r - 1) * t * t) as i64), (3 * r * k) as i64);
    let rhs = LogScalar::from_log(Interval::from_rational(&exponent))
        .mul(&LogScalar::from_u64(r).pow_rational(&int((rk - t) as i64)));
    let bound = Check::log_space(
        format!("multinomial(rk-t; k..k, k-t) <= exp(-(r-1)t^2/3rk) r^(rk-t) [k={k}, t={t}, r={r}]"),
        &LogScalar::from_biguint(&lhs),
        Relation::Le,
        &rhs,
    );
    Ok(AppendixReport {
        k,
        t,
        r,
        lhs: lhs.to_string(),
        product_identity: ratio == product,
        factored_identity: ratio == factored,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Book theorem hypotheses

#[derive(Clone, Debug, Serialize)]
pub struct HypothesesReport {
    pub checks: Vec<Check>,
}

impl HypothesesReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rational_of(v: &BigUint) -> Rational {
    BigRational::from_integer(BigInt::from(v.clone()))
}

/// Evaluates the four hypotheses of the book theorem:
/// `μ >= 2^10 r^3`, `t >= μ^5/p`, `|X| >= (μ²/p)^{μrt}` and, for each `i`,
/// `|Y_i| >= (e^{2^13 r^3/μ²}/p)^t m`.
pub fn thm_book_hypotheses(
    p: &Rational,
    mu: &Rational,
    t: &BigUint,
    m: &BigUint,
    r: u64,
    size_x: &BigUint,
    size_ys: &[BigUint],
) -> Result<HypothesesReport> {
    if !(p.is_positive() && *p <= Rational::one()) {
        return Err(Error::InvalidInput("p must lie in (0, 1]".into()));
    }
    if t.is_zero() || m.is_zero() || r == 0 || !mu.is_positive() {
        return Err(Error::InvalidInput("need t, m, r >= 1 and mu > 0".into()));
    }
    let r3 = int((r * r * r) as i64);
    let t_q = rational_of(t);
    let mut checks = vec![
        Check::exact("mu >= 2^10 r^3", mu, Relation::Ge, &(int(1024) * &r3)),
        Check::exact("t >= mu^5 / p", &t_q, Relation::Ge, &(powi(mu, 5) / p)),
    ];

    let mu2_over_p = LogScalar::from_rational(&(mu * mu / p));
    let x_exp = mu * int(r as i64) * &t_q;
    checks.push(Check::log_space(
        "|X| >= (mu^2/p)^(mu r t)",
        &LogScalar::from_biguint(size_x),
        Relation::Ge,
        &mu2_over_p.pow_rational(&x_exp),
    ));

    let c = int(8192) * &r3 / (mu * mu);
    let base = LogScalar::from_log(Interval::from_rational(&c)).div(&LogScalar::from_rational(p));
    let y_rhs = base.pow_rational(&t_q).mul(&LogScalar::from_biguint(m));
    for (i, y) in size_ys.iter().enumerate() {
        checks.push(Check::log_space(
            format!("|Y_{i}| >= (e^(2^13 r^3/mu^2)/p)^t m"),
            &LogScalar::from_biguint(y),
            Relation::Ge,
            &y_rhs,
        ));
    }
    Ok(HypothesesReport { checks })
}

// ---------------------------------------------------------------------------
// Constant chain for the main Ramsey bound

/// The exact parameter choices as functions of `r`.
#[derive(Clone, Debug)]
pub struct MainConstants {
    pub r: u64,
    pub delta: Rational,
    pub k: Rational,
    pub eps: Rational,
    pub mu: Rational,
    pub t: Rational,
    pub p: Rational,
}

impl MainConstants {
    pub fn new(r: u64) -> Self {
        let r_q = int(r as i64);
        let two = int(2);
        let delta = powi(&two, -160) * powi(&r_q, -12);
        let k = powi(&two, 160) * powi(&r_q, 16);
        let eps = powi(&two, -50) * powi(&r_q, -4);
        let mu = powi(&two, 30) * powi(&r_q, 3);
        let t = powi(&two, -40) * powi(&r_q, -3) * &k;
        let p = r_q.recip() - &two * &eps;
        MainConstants {
            r,
            delta,
            k,
            eps,
            mu,
            t,
            p,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub r: u64,
    pub links: Vec<Check>,
    /// Least `k` (as `log2`) for which `t = 2^-40 r^-3 k >= mu^5/p` holds.
    pub link_i_min_log2_k: f64,
}

impl ChainReport {
    pub fn pass(&self) -> bool {
        self.links.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.links.iter().filter(|c| !c.pass)
    }
}

fn ln_q(q: &Rational) -> Interval {
    if q.is_one() {
        Interval::zero()
    } else {
        Interval::from_rational(q).ln()
    }
}

/// Verifies every numbered inequality in the parameter chain of the main
/// theorem at `k = 2^160 r^16`.
pub fn thm51_chain(r: u64) -> Result<ChainReport> {
    if r < 2 {
        return Err(Error::InvalidInput("the constant chain needs r >= 2".into()));
    }
    let c = MainConstants::new(r);
    let r_q = int(r as i64);
    let r3 = powi(&r_q, 3);
    let two = int(2);
    let mut links = Vec::new();

    // (i) hypotheses of the book theorem
    let mu5_over_p = powi(&c.mu, 5) / &c.p;
    links.push(Check::exact("i: t >= mu^5/p", &c.t, Relation::Ge, &mu5_over_p));
    links.push(Check::exact(
        "i.mu: mu >= 2^10 r^3",
        &c.mu,
        Relation::Ge,
        &(int(1024) * &r3),
    ));

    // (ii) the |X| chain, in logs
    let ln_r = ln_q(&r_q);
    let rk = &r_q * &c.k;
    links.push(Check::of_logs(
        "ii.n: e^(-delta k) r^(rk) >= r^(rk/2)",
        &Interval::from_rational(&rk)
            .mul(&ln_r)
            .sub(&Interval::from_rational(&(&c.delta * &c.k))),
        Relation::Ge,
        &Interval::from_rational(&(&rk / &two)).mul(&ln_r),
    ));
    let quarter = &rk / int(4);
    let lhs_x = Interval::from_rational(&quarter)
        .mul(&ln_q(&((int(1) + &c.eps) / &r_q)))
        .add(&Interval::from_rational(&(&rk / &two)).mul(&ln_r));
    links.push(Check::of_logs(
        "ii.a: ((1+eps)/r)^(rk/4) r^(rk/2) >= r^(rk/4)",
        &lhs_x,
        Relation::Ge,
        &Interval::from_rational(&quarter).mul(&ln_r),
    ));
    let e10 = powi(&two, -10) * &rk;
    let base61 = powi(&two, 61) * powi(&r_q, 7);
    let mid = Interval::from_rational(&e10).mul(&ln_q(&base61));
    links.push(Check::of_logs(
        "ii.b: r^(rk/4) >= (2^61 r^7)^(2^-10 rk)",
        &Interval::from_rational(&quarter).mul(&ln_r),
        Relation::Ge,
        &mid,
    ));
    let xr_exp = &c.mu * &r_q * &c.t;
    links.push(Check::of_logs(
        "ii.c: (2^61 r^7)^(2^-10 rk) >= (mu^2/p)^(mu r t)",
        &mid,
        Relation::Ge,
        &Interval::from_rational(&xr_exp).mul(&ln_q(&(&c.mu * &c.mu / &c.p))),
    ));

    // (iii) t/8k identity and the dyadic inequality
    let lhs_iii = &c.t / (int(8) * &c.k);
    let target = powi(&two, -43) / &r3;
    links.push(Check::exact(
        "iii.identity: t/8k == 2^-43 r^-3 (<=)",
        &lhs_iii,
        Relation::Le,
        &target,
    ));
    links.push(Check::exact(
        "iii.identity: t/8k == 2^-43 r^-3 (>=)",
        &lhs_iii,
        Relation::Ge,
        &target,
    ));
    let term_a = int(8192) * &r3 / (&c.mu * &c.mu);
    let term_b = int(4) * &c.eps * &r_q;
    links.push(Check::exact(
        "iii.terms: 2^13 r^3/mu^2 + 4 eps r == 2^-47 r^-3 + 2^-48 r^-3",
        &(&term_a + &term_b),
        Relation::Le,
        &((powi(&two, -47) + powi(&two, -48)) / &r3),
    ));
    links.push(Check::exact(
        "iii: t/8k >= 2^13 r^3/mu^2 + 4 eps r",
        &lhs_iii,
        Relation::Ge,
        &(&term_a + &term_b),
    ));
    links.push(Check::exact(
        "iii.exact: 2^-43 >= 2^-47 + 2^-48",
        &powi(&two, -43),
        Relation::Ge,
        &(powi(&two, -47) + powi(&two, -48)),
    ));

    // (iv) delta against t^2/k^2
    let tk2 = (&c.t * &c.t) / (&c.k * &c.k);
    links.push(Check::exact(
        "iv: delta <= 2^-10 t^2/k^2",
        &c.delta,
        Relation::Le,
        &(powi(&two, -10) * &tk2),
    ));
    links.push(Check::exact(
        "iv.es: delta k <= t^2/6k - t^2/8k",
        &(&c.delta * &c.k),
        Relation::Le,
        &(&c.t * &c.t / (int(24) * &c.k)),
    ));
    links.push(Check::exact(
        "iv.r: (r-1) t^2/3rk >= t^2/6k",
        &(int(r as i64 - 1) / (int(3) * &r_q)),
        Relation::Ge,
        &rat(1, 6),
    ));

    // (v) p against e^{-3 eps r}/r
    links.push(Check::of_logs(
        "v: p = 1/r - 2 eps >= e^(-3 eps r)/r",
        &ln_q(&c.p),
        Relation::Ge,
        &Interval::from_rational(&(-(int(3) * &c.eps * &r_q))).sub(&ln_r),
    ));

    // (vi) the |Y_i| chain
    links.push(Check::exact(
        "vi.s: eps^2 k <= eps t",
        &(&c.eps * &c.eps * &c.k),
        Relation::Le,
        &(&c.eps * &c.t),
    ));
    let eps_t = &c.eps * &c.t;
    links.push(Check::of_logs(
        "vi.a: ((1+eps)/r)^(eps t) e^(-3 eps r t) >= e^(-4 eps r t)",
        &Interval::from_rational(&eps_t)
            .mul(&ln_q(&((int(1) + &c.eps) / &r_q)))
            .sub(&Interval::from_rational(&(int(3) * &eps_t * &r_q))),
        Relation::Ge,
        &Interval::from_rational(&(-(int(4) * &eps_t * &r_q))),
    ));
    links.push(Check::exact(
        "vi.b: t^2/8k - 4 eps r t >= 2^13 r^3 t/mu^2",
        &(&c.t * &c.t / (int(8) * &c.k) - int(4) * &c.eps * &r_q * &c.t),
        Relation::Ge,
        &(int(8192) * &r3 * &c.t / (&c.mu * &c.mu)),
    ));

    // k with 2^-40 r^-3 k = mu^5/p
    let k_min = powi(&two, 40) * &r3 * &mu5_over_p;
    let link_i_min_log2_k = LogScalar::from_rational(&k_min).log_f64() / std::f64::consts::LN_2;

    Ok(ChainReport {
        r,
        links,
        link_i_min_log2_k,
    })
}

// ---------------------------------------------------------------------------
// Book size targets

#[derive(Clone, Debug, Serialize)]
pub struct BookTargetReport {
    pub r: u64,
    pub k: String,
    pub t: String,
    /// `ln(e^{−t²/8k} r^{−t})`: pages per vertex of the host.
    pub m_coefficient_log: f64,
    /// `ln(e^{−t²/6k} r^{rk−t})`: the Erdős–Szekeres bound on `R(k,…,k,k−t)`.
    pub es_bound_log: f64,
    /// `ln(e^{−δk} r^{rk})` with the main theorem's `δ`.
    pub n_min_log: f64,
    /// `ln` of the page target for a host of size `n_min`.
    pub m_target_log: f64,
    /// Target pages dominate the bound (certified).
    pub holds: bool,
    /// Parameters are in the main theorem's regime, where `holds` is asserted.
    pub in_regime: bool,
}

/// Page-count target against the Erdős–Szekeres bound for `R(k,…,k,k−t)`.
pub fn book_target_bounds(r: u64, k: &BigUint, t: &BigUint) -> Result<BookTargetReport> {
    if r == 0 || k.is_zero() || t > k {
        return Err(Error::InvalidInput("need r >= 1, k >= 1 and 0 <= t <= k".into()));
    }
    let kq = rational_of(k);
    let tq = rational_of(t);
    let r_q = int(r as i64);
    let ln_r = ln_q(&r_q);
    let iv = |q: &Rational| {
        if q.is_zero() {
            Interval::zero()
        } else {
            Interval::from_rational(q)
        }
    };
    let t2k = &tq * &tq / &kq;
    let m_coeff = iv(&(-&t2k / int(8))).sub(&iv(&tq).mul(&ln_r));
    let es = iv(&(-&t2k / int(6))).add(&iv(&(&r_q * &kq - &tq)).mul(&ln_r));
    let delta = powi(&int(2), -160) * powi(&r_q, -12);
    let n_min = iv(&(&r_q * &kq)).mul(&ln_r).sub(&iv(&(&delta * &kq)));
    let target = m_coeff.add(&n_min);
    let holds = target.certainly_ge(&es);

    let k_main = powi(&int(2), 160) * powi(&r_q, 16);
    let t_main = powi(&int(2), -40) * powi(&r_q, -3) * &kq;
    let in_regime = r >= 2 && kq >= k_main && tq >= t_main;
    if in_regime && !holds {
        return Err(Error::violation(
            "page target",
            format!("e^(-t^2/8k) r^-t n < e^(-t^2/6k) r^(rk-t) at r={r}"),
        ));
    }
    Ok(BookTargetReport {
        r,
        k: k.to_string(),
        t: t.to_string(),
        m_coefficient_log: m_coeff.to_f64(),
        es_bound_log: es.to_f64(),
        n_min_log: n_min.to_f64(),
        m_target_log: target.to_f64(),
        holds,
        in_regime,
    })
}

/// `log2 v`, accurate for integers of any size.
pub fn log2_biguint(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        v.to_f64().unwrap().log2()
    } else {
        let shift = bits - 64;
        (v >> shift).to_f64().unwrap().log2() + shift as f64
    }
}
