//! Exact comparisons among numbers of the form `2^a · e^(b / 2^k)`.
//!
//! Ordering two such numbers reduces to the sign of `A·ln 2 + B/2^K` with
//! integers `A, B`. Because ln 2 is irrational this vanishes only when
//! `A = B = 0`; every other case is settled by refining an enclosing interval
//! for ln 2 until it excludes zero.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Default ceiling on the working precision (bits) of ln 2 enclosures.
pub const DEFAULT_MAX_PRECISION: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("precision exhausted: {what} is undecided at {bits} bits")]
pub struct PrecisionExhausted {
    pub what: String,
    pub bits: u64,
}

/// Integers `(lo, hi)` with `lo ≤ 2^prec · ln 2 ≤ hi`.
///
/// Uses `ln 2 = 2·atanh(1/3) = Σ_j 2 / ((2j+1)·3^(2j+1))`; each floored term
/// loses less than one unit and the truncated tail is below one unit.
pub fn ln2_enclosure(prec: u64) -> (BigInt, BigInt) {
    let scale = BigInt::one() << (prec + 1);
    let mut pow3 = BigInt::from(3);
    let nine = BigInt::from(9);
    let mut sum = BigInt::zero();
    let mut terms = 0u64;
    let mut j = 0u64;
    loop {
        let denom = &pow3 * BigInt::from(2 * j + 1);
        sum += &scale / &denom;
        terms += 1;
        pow3 *= &nine;
        // remaining tail < scale·(9/8)/pow3 < 1 once pow3 > 2·scale
        if pow3 > &scale << 1 {
            break;
        }
        j += 1;
    }
    let hi = &sum + BigInt::from(terms + 1);
    (sum, hi)
}

/// Sign of `a·ln 2 + b·2^(−k)`.
pub fn sign_of_log_combination(
    a: &BigInt,
    b: &BigInt,
    k: u64,
    max_precision: u64,
) -> Result<Ordering, PrecisionExhausted> {
    if a.is_zero() {
        return Ok(b.sign_ordering());
    }
    if b.is_zero() {
        return Ok(a.sign_ordering());
    }
    let mut prec = (k + a.bits() + 64).max(128);
    loop {
        if prec > max_precision {
            return Err(PrecisionExhausted {
                what: format!("sign of {a}·ln2 + {b}·2^-{k}"),
                bits: prec,
            });
        }
        let (lo, hi) = scaled_log_interval(a, b, k, prec);
        if lo.is_positive() {
            return Ok(Ordering::Greater);
        }
        if hi.is_negative() {
            return Ok(Ordering::Less);
        }
        prec *= 2;
    }
}

/// Interval for `2^prec · (a·ln 2 + b·2^(−k))`, requires `prec ≥ k`.
fn scaled_log_interval(a: &BigInt, b: &BigInt, k: u64, prec: u64) -> (BigInt, BigInt) {
    let (l, u) = ln2_enclosure(prec);
    let (al, au) = if a.is_negative() {
        (a * &u, a * &l)
    } else {
        (a * &l, a * &u)
    };
    let shifted = b << (prec - k);
    (al + &shifted, au + shifted)
}

trait SignOrdering {
    fn sign_ordering(&self) -> Ordering;
}

impl SignOrdering for BigInt {
    fn sign_ordering(&self) -> Ordering {
        self.cmp(&BigInt::zero())
    }
}

/// The positive real `2^two_pow · e^(exp_num / 2^exp_shift)`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledExponent {
    #[serde(rename = "a", with = "decimal")]
    pub two_pow: BigInt,
    #[serde(rename = "b", with = "decimal")]
    pub exp_num: BigInt,
    #[serde(rename = "k")]
    pub exp_shift: u64,
}

impl ScaledExponent {
    pub fn new(two_pow: BigInt, exp_num: BigInt, exp_shift: u64) -> Self {
        Self {
            two_pow,
            exp_num,
            exp_shift,
        }
        .reduced()
    }

    pub fn one() -> Self {
        Self::new(BigInt::zero(), BigInt::zero(), 0)
    }

    pub fn power_of_two(a: i64) -> Self {
        Self::new(BigInt::from(a), BigInt::zero(), 0)
    }

    /// `e^(2^(−k))`.
    pub fn dyadic_root_of_e(k: u64) -> Self {
        Self::new(BigInt::zero(), BigInt::one(), k)
    }

    fn reduced(mut self) -> Self {
        if self.exp_num.is_zero() {
            self.exp_shift = 0;
            return self;
        }
        let tz = self.exp_num.trailing_zeros().unwrap_or(0).min(self.exp_shift);
        if tz > 0 {
            self.exp_num >>= tz;
            self.exp_shift -= tz;
        }
        self
    }

    fn rescaled_num(&self, shift: u64) -> BigInt {
        &self.exp_num << (shift - self.exp_shift)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let k = self.exp_shift.max(other.exp_shift);
        Self::new(
            &self.two_pow + &other.two_pow,
            self.rescaled_num(k) + other.rescaled_num(k),
            k,
        )
    }

    pub fn pow(&self, n: &BigInt) -> Self {
        Self::new(&self.two_pow * n, &self.exp_num * n, self.exp_shift)
    }

    pub fn square(&self) -> Self {
        self.pow(&BigInt::from(2))
    }

    pub fn recip(&self) -> Self {
        Self::new(-&self.two_pow, -&self.exp_num, self.exp_shift)
    }

    /// Exact ordering, refining ln 2 up to `max_precision` bits.
    pub fn compare(&self, other: &Self, max_precision: u64) -> Result<Ordering, PrecisionExhausted> {
        let k = self.exp_shift.max(other.exp_shift);
        let a = &self.two_pow - &other.two_pow;
        let b = self.rescaled_num(k) - other.rescaled_num(k);
        sign_of_log_combination(&a, &b, k, max_precision)
    }

    /// Natural logarithm as an `f64` (for reporting only).
    pub fn ln_f64(&self) -> f64 {
        let a = self.two_pow.to_f64().unwrap_or(f64::INFINITY);
        a * std::f64::consts::LN_2 + ratio_to_f64(&self.exp_num, self.exp_shift)
    }

    pub fn to_f64(&self) -> f64 {
        self.ln_f64().exp()
    }

    /// Integers `(lo, hi)` enclosing `2^prec · ln(self)`; requires `prec ≥ exp_shift`.
    pub fn scaled_ln_enclosure(&self, prec: u64) -> (BigInt, BigInt) {
        scaled_log_interval(&self.two_pow, &self.exp_num, self.exp_shift, prec)
    }
}

/// `num / 2^shift` as `f64`, graceful for shifts past the exponent range.
pub fn ratio_to_f64(num: &BigInt, shift: u64) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let bits = num.bits();
    let drop = bits.saturating_sub(60);
    let mant = (num >> drop).to_f64().unwrap_or(0.0);
    let e = drop as f64 - shift as f64;
    if e < -1100.0 {
        return 0.0;
    }
    mant * e.exp2()
}

impl fmt::Debug for ScaledExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^{}·e^({}/2^{})", self.two_pow, self.exp_num, self.exp_shift)
    }
}

impl fmt::Display for ScaledExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub(crate) mod decimal {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
