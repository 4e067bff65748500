//! Directed-rounding real arithmetic.
//!
//! An [`Interval`] holds a lower bound rounded toward −∞ and an upper bound
//! rounded toward +∞, both at the working precision. Inequality checks are
//! answered with [`Interval::certainly_le`] and friends, which only return
//! `true` when the bound holds for every real in both intervals.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use astro_float::{BigFloat, Consts, RoundingMode, Sign, Word};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Default working precision in bits.
pub const DEFAULT_PRECISION_BITS: usize = 128;

/// Environment variable overriding [`DEFAULT_PRECISION_BITS`].
pub const PRECISION_ENV: &str = "RF_PRECISION_BITS";

static PRECISION: AtomicUsize = AtomicUsize::new(0);

/// Current working precision. Reads `RF_PRECISION_BITS` on first use.
pub fn precision_bits() -> usize {
    match PRECISION.load(AtomicOrdering::Relaxed) {
        0 => {
            let p = std::env::var(PRECISION_ENV)
                .ok()
                .and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&p| p >= 64)
                .unwrap_or(DEFAULT_PRECISION_BITS);
            PRECISION.store(p, AtomicOrdering::Relaxed);
            p
        }
        p => p,
    }
}

/// Overrides the working precision for the whole process (minimum 64 bits).
pub fn set_precision_bits(bits: usize) {
    PRECISION.store(bits.max(64), AtomicOrdering::Relaxed);
}

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

fn with_cc<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

const DOWN: RoundingMode = RoundingMode::Down;
// In astro-float, `Up` rounds toward +inf and `Down` toward -inf.
const UP: RoundingMode = RoundingMode::Up;

/// Exact conversion of an unsigned big integer.
fn biguint_to_bigfloat(x: &BigUint) -> BigFloat {
    let digits: Vec<Word> = if astro_float::WORD_BIT_SIZE == 64 {
        x.to_u64_digits().into_iter().map(|w| w as Word).collect()
    } else {
        x.to_u32_digits().into_iter().map(|w| w as Word).collect()
    };
    if digits.is_empty() {
        return BigFloat::from_word(0, 64);
    }
    let bits = (digits.len() * astro_float::WORD_BIT_SIZE) as astro_float::Exponent;
    BigFloat::from_words(&digits, Sign::Pos, bits)
}

fn bigint_to_bigfloat(x: &BigInt) -> BigFloat {
    let m = biguint_to_bigfloat(x.magnitude());
    if x.is_negative() {
        m.neg()
    } else {
        m
    }
}

/// Closed real interval with directed-rounded endpoints.
#[derive(Clone, Debug)]
pub struct Interval {
    lo: BigFloat,
    hi: BigFloat,
}

impl Interval {
    fn p() -> usize {
        precision_bits()
    }

    fn new(lo: BigFloat, hi: BigFloat) -> Self {
        debug_assert!(lo.is_nan() || hi.is_nan() || lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(x: BigFloat) -> Self {
        Interval::new(x.clone(), x)
    }

    pub fn zero() -> Self {
        Self::from_i64(0)
    }

    pub fn one() -> Self {
        Self::from_i64(1)
    }

    pub fn from_i64(v: i64) -> Self {
        Self::point(BigFloat::from_i64(v, 64))
    }

    pub fn from_u64(v: u64) -> Self {
        Self::point(BigFloat::from_u64(v, 64))
    }

    /// Exact: every finite `f64` is a dyadic rational.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite input {v}");
        Self::point(BigFloat::from_f64(v, 64))
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        Self::from_bigint(&BigInt::from(v.clone()))
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        let exact = bigint_to_bigfloat(v);
        let p = Self::p();
        let lo = round_to(&exact, p, false);
        let hi = round_to(&exact, p, true);
        Interval::new(lo, hi)
    }

    /// Tightest enclosure of a rational at the working precision.
    pub fn from_rational(q: &BigRational) -> Self {
        let num = bigint_to_bigfloat(q.numer());
        let den = bigint_to_bigfloat(q.denom());
        let p = Self::p();
        Interval::new(num.div(&den, p, DOWN), num.div(&den, p, UP))
    }

    pub fn lo(&self) -> &BigFloat {
        &self.lo
    }

    pub fn hi(&self) -> &BigFloat {
        &self.hi
    }

    /// Midpoint as `f64`, for reporting only.
    pub fn to_f64(&self) -> f64 {
        let mid = self.lo.add(&self.hi, Self::p(), RoundingMode::ToEven);
        bigfloat_to_f64(&mid) / 2.0
    }

    pub fn lo_f64(&self) -> f64 {
        bigfloat_to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        bigfloat_to_f64(&self.hi)
    }

    pub fn width(&self) -> f64 {
        bigfloat_to_f64(&self.hi.sub(&self.lo, 64, UP))
    }

    pub fn is_point_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn neg(&self) -> Self {
        Interval::new(self.hi.neg(), self.lo.neg())
    }

    pub fn add(&self, o: &Self) -> Self {
        let p = Self::p();
        Interval::new(add_rd(&self.lo, &o.lo, p, false), add_rd(&self.hi, &o.hi, p, true))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = Self::p();
        let pairs = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let lo = pairs
            .iter()
            .map(|(a, b)| mul_rd(a, b, p, false))
            .reduce(|a, b| if b < a { b } else { a })
            .unwrap();
        let hi = pairs
            .iter()
            .map(|(a, b)| mul_rd(a, b, p, true))
            .reduce(|a, b| if b > a { b } else { a })
            .unwrap();
        Interval::new(lo, hi)
    }

    /// Division; the divisor must not straddle zero.
    pub fn div(&self, o: &Self) -> Self {
        assert!(
            o.lo.is_positive() || o.hi.is_negative(),
            "interval division by a range containing zero"
        );
        let p = Self::p();
        let inv = Interval::new(o.hi.reciprocal(p, DOWN), o.lo.reciprocal(p, UP));
        self.mul(&inv)
    }

    pub fn mul_u64(&self, k: u64) -> Self {
        self.mul(&Self::from_u64(k))
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Square root of a non-negative interval (a lower end below zero is clamped).
    pub fn sqrt(&self) -> Self {
        let p = Self::p();
        let zero = BigFloat::from_word(0, 64);
        let lo = if self.lo.is_positive() {
            widen(self.lo.sqrt(p, DOWN), false)
        } else {
            zero.clone()
        };
        assert!(!self.hi.is_negative(), "sqrt of a negative interval");
        let hi = if self.hi.is_positive() {
            widen(self.hi.sqrt(p, UP), true)
        } else {
            zero
        };
        Interval::new(lo.max(&BigFloat::from_word(0, 64)), hi)
    }

    pub fn exp(&self) -> Self {
        let p = Self::p();
        with_cc(|cc| {
            Interval::new(
                widen(self.lo.exp(p, DOWN, cc), false),
                widen(self.hi.exp(p, UP, cc), true),
            )
        })
    }

    /// Natural log of a strictly positive interval.
    pub fn ln(&self) -> Self {
        assert!(self.lo.is_positive(), "ln of a non-positive interval");
        let p = Self::p();
        let one = BigFloat::from_word(1, 64);
        with_cc(|cc| {
            let lo = if self.lo == one {
                BigFloat::from_word(0, 64)
            } else {
                let v = self.lo.ln(p, DOWN, cc);
                widen(v, false)
            };
            let hi = if self.hi == one {
                BigFloat::from_word(0, 64)
            } else {
                let v = self.hi.ln(p, UP, cc);
                widen(v, true)
            };
            Interval::new(lo, hi)
        })
    }

    /// `cosh` over the interval (even, increasing on `[0, ∞)`).
    pub fn cosh(&self) -> Self {
        let p = Self::p();
        let a = self.lo.abs();
        let b = self.hi.abs();
        let straddles = self.lo.is_negative() && self.hi.is_positive();
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        with_cc(|cc| {
            let lo = if straddles || small.is_zero() {
                BigFloat::from_word(1, 64)
            } else {
                widen(small.cosh(p, DOWN, cc), false)
            };
            let hi = if large.is_zero() {
                BigFloat::from_word(1, 64)
            } else {
                widen(large.cosh(p, UP, cc), true)
            };
            Interval::new(lo.max(&BigFloat::from_word(1, 64)), hi)
        })
    }

    /// `cos` over the interval, using the 1-Lipschitz bound around the midpoint.
    pub fn cos(&self) -> Self {
        let p = Self::p();
        let one = BigFloat::from_word(1, 64);
        if self.is_point_zero() {
            return Self::one();
        }
        with_cc(|cc| {
            let mid = self.lo.add(&self.hi, p + 64, RoundingMode::ToEven);
            let mut mid = mid;
            if let Some(e) = mid.exponent() {
                mid.set_exponent(e - 1);
            }
            let rad = self.hi.sub(&mid, p, UP).abs().max(&mid.sub(&self.lo, p, UP).abs());
            let c_lo = widen(mid.cos(p, DOWN, cc), false);
            let c_hi = widen(mid.cos(p, UP, cc), true);
            let lo = c_lo.sub(&rad, p, DOWN);
            let hi = c_hi.add(&rad, p, UP);
            let lo = lo.max(&one.neg());
            let hi = hi.min(&one);
            Interval::new(lo, hi)
        })
    }

    pub fn max(&self, o: &Self) -> Self {
        Interval::new(self.lo.max(&o.lo), self.hi.max(&o.hi))
    }

    /// Every point of `self` is `<=` every point of `o`.
    pub fn certainly_le(&self, o: &Self) -> bool {
        self.hi <= o.lo
    }

    pub fn certainly_lt(&self, o: &Self) -> bool {
        self.hi < o.lo
    }

    pub fn certainly_ge(&self, o: &Self) -> bool {
        o.certainly_le(self)
    }

    pub fn certainly_nonneg(&self) -> bool {
        !self.lo.is_negative()
    }

    /// `self ∩ [0, ∞)`, if non-empty.
    pub fn nonneg_part(&self) -> Option<Self> {
        if self.hi.is_negative() {
            return None;
        }
        let zero = BigFloat::from_word(0, 64);
        Some(Interval::new(self.lo.clone().max(&zero), self.hi.clone()))
    }

    /// `self ∩ (−∞, 0]`, if non-empty.
    pub fn nonpos_part(&self) -> Option<Self> {
        if self.lo.is_positive() {
            return None;
        }
        let zero = BigFloat::from_word(0, 64);
        Some(Interval::new(self.lo.clone(), self.hi.clone().min(&zero)))
    }

    /// Interval hull of `self` and `o`.
    pub fn hull(&self, o: &Self) -> Self {
        Interval::new(self.lo.min(&o.lo), self.hi.max(&o.hi))
    }

    /// Compares midpoints; for ordering reports, not for certification.
    pub fn cmp_mid(&self, o: &Self) -> Ordering {
        self.to_f64().partial_cmp(&o.to_f64()).unwrap_or(Ordering::Equal)
    }

    pub fn pi() -> Self {
        let p = Self::p();
        with_cc(|cc| {
            let lo = widen(cc.pi(p, DOWN), false);
            let hi = widen(cc.pi(p, UP), true);
            Interval::new(lo, hi)
        })
    }
}

fn round_to(x: &BigFloat, p: usize, up: bool) -> BigFloat {
    let mut y = x.clone();
    let rm = if up { UP } else { DOWN };
    if y.precision().unwrap_or(0) > p {
        y.set_precision(p, rm).expect("precision change");
    }
    y
}

/// Rounds `a + b` toward −∞ (`up = false`) or +∞.
fn add_rd(a: &BigFloat, b: &BigFloat, p: usize, up: bool) -> BigFloat {
    a.add(b, p, if up { UP } else { DOWN })
}

fn mul_rd(a: &BigFloat, b: &BigFloat, p: usize, up: bool) -> BigFloat {
    a.mul(b, p, if up { UP } else { DOWN })
}

/// Pushes a transcendental result one further unit outward, so a single
/// misrounded last bit in the library cannot flip a certified comparison.
fn widen(x: BigFloat, up: bool) -> BigFloat {
    if x.is_zero() {
        return x;
    }
    let p = precision_bits();
    let e = x.exponent().expect("finite value") as isize;
    let mut ulp = BigFloat::from_word(1, 64);
    let ulp_exp = e - p as isize + 1;
    ulp.set_exponent(ulp_exp.clamp(i32::MIN as isize + 2, i32::MAX as isize) as i32);
    if up {
        x.add(&ulp, p + 8, UP)
    } else {
        x.sub(&ulp, p + 8, DOWN)
    }
}

pub(crate) fn bigfloat_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let (m, _n, s, e, _) = x.as_raw_parts().expect("finite value");
    // Top word carries the leading bits; mantissa value is in [0.5, 1).
    let top = *m.last().unwrap() as f64;
    let frac = top / 2f64.powi(astro_float::WORD_BIT_SIZE as i32);
    let v = frac * 2f64.powi(e.clamp(-1100, 1100));
    if s == Sign::Neg {
        -v
    } else {
        v
    }
}

/// Convenience: enclosure of a ratio of machine integers.
pub fn ratio(num: i64, den: i64) -> Interval {
    Interval::from_rational(&BigRational::new(num.into(), den.into()))
}

/// Enclosure of `x` unless it is exactly zero.
pub fn rational_or_zero(x: &BigRational) -> Interval {
    if x.is_zero() {
        Interval::zero()
    } else {
        Interval::from_rational(x)
    }
}
