//! Exact signed integers that may be far too large to store bit-by-bit.
//!
//! A [`BigIndex`] is kept as a sum of terms `c · 2^e` with odd coefficients
//! and strictly increasing exponents. The canonical form guarantees that
//! every term is separated from the next one by more than the bit length of
//! its coefficient, so the value is dominated by the top term:
//!
//! ```text
//! |Σ_{i<top} c_i 2^{e_i}| < 2^{e_top - 1}
//! ```
//!
//! This makes sign, comparison and bit length decidable without ever
//! materializing numbers such as `3N·2^{3N}` with `N ≈ 2^740`. Values whose
//! binary expansion is small enough are also available as a plain
//! [`BigInt`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest bit length for which [`BigIndex::to_bigint`] materializes a value.
pub const PLAIN_BIT_LIMIT: u64 = 1 << 22;

#[derive(Clone, Debug)]
struct Term {
    exp: BigUint,
    coeff: BigInt,
}

#[derive(Clone, Default)]
pub struct BigIndex {
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid integer literal `{0}`")]
pub struct ParseIndexError(pub String);

impl BigIndex {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from(1i64)
    }

    pub fn from_bigint(v: BigInt) -> Self {
        Self::canonical(vec![Term {
            exp: BigUint::zero(),
            coeff: v,
        }])
    }

    /// `coeff · 2^exp` for an exponent that need not fit in a machine word.
    pub fn scaled_pow2(coeff: BigInt, exp: BigUint) -> Self {
        Self::canonical(vec![Term { exp, coeff }])
    }

    pub fn pow2(exp: BigUint) -> Self {
        Self::scaled_pow2(BigInt::one(), exp)
    }

    fn canonical(mut input: Vec<Term>) -> Self {
        input.retain(|t| !t.coeff.is_zero());
        input.sort_by(|a, b| a.exp.cmp(&b.exp));
        let mut out: Vec<Term> = Vec::with_capacity(input.len());
        let mut acc: Option<Term> = None;
        for t in input {
            acc = match acc {
                None => Some(t),
                Some(mut a) => {
                    let gap = &t.exp - &a.exp;
                    let reach = BigUint::from(a.coeff.bits() + 1);
                    if gap <= reach {
                        let shift = gap.to_u64().expect("merge gap is bounded by a bit length");
                        a.coeff += t.coeff << shift;
                        if a.coeff.is_zero() {
                            None
                        } else {
                            Some(a)
                        }
                    } else {
                        out.push(a);
                        Some(t)
                    }
                }
            };
        }
        out.extend(acc);
        for t in &mut out {
            let tz = t.coeff.trailing_zeros().unwrap_or(0);
            if tz > 0 {
                t.coeff >>= tz;
                t.exp += tz;
            }
        }
        Self { terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn signum(&self) -> Ordering {
        match self.terms.last() {
            None => Ordering::Equal,
            Some(t) if t.coeff.is_negative() => Ordering::Less,
            Some(_) => Ordering::Greater,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Number of bits of `|self|` (so `floor(log2 |x|) + 1`, and 0 for zero).
    pub fn bits(&self) -> BigUint {
        let Some(top) = self.terms.last() else {
            return BigUint::zero();
        };
        let magnitude_bits = top.coeff.bits();
        let base = &top.exp + BigUint::from(magnitude_bits);
        if magnitude_bits > 1 || self.terms.len() == 1 {
            return base;
        }
        // top coefficient is ±1: the remainder either tops up or borrows.
        let below = &self.terms[self.terms.len() - 2];
        if below.coeff.sign() == top.coeff.sign() {
            base
        } else {
            base - 1u32
        }
    }

    /// Exact value when its binary expansion is at most [`PLAIN_BIT_LIMIT`] bits.
    pub fn to_bigint(&self) -> Option<BigInt> {
        let top = match self.terms.last() {
            None => return Some(BigInt::zero()),
            Some(t) => t,
        };
        let top_bits = (&top.exp + BigUint::from(top.coeff.bits())).to_u64()?;
        if top_bits > PLAIN_BIT_LIMIT {
            return None;
        }
        let mut acc = BigInt::zero();
        for t in &self.terms {
            acc += &t.coeff << t.exp.to_u64()?;
        }
        Some(acc)
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.bits() > BigUint::from(63u32) {
            return None;
        }
        self.to_bigint()?.to_i64()
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.bits() > BigUint::from(64u32) {
            return None;
        }
        self.to_bigint()?.to_u64()
    }

    pub fn to_biguint(&self) -> Option<BigUint> {
        self.to_bigint()?.to_biguint()
    }

    /// Nearest `f64`, saturating to ±∞ for magnitudes beyond the `f64` range.
    pub fn to_f64(&self) -> f64 {
        let bits = self.bits();
        if bits > BigUint::from(1100u32) {
            return if self.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        self.to_bigint()
            .and_then(|v| v.to_f64())
            .unwrap_or(f64::NAN)
    }

    /// Exact multiplication by `2^shift`.
    pub fn shl(&self, shift: &BigUint) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    exp: &t.exp + shift,
                    coeff: t.coeff.clone(),
                })
                .collect(),
        }
    }
}

macro_rules! from_prim {
    ($($t:ty),*) => {$(
        impl From<$t> for BigIndex {
            fn from(v: $t) -> Self {
                Self::from_bigint(BigInt::from(v))
            }
        }
    )*};
}
from_prim!(i32, i64, i128, u32, u64, usize);

impl From<BigInt> for BigIndex {
    fn from(v: BigInt) -> Self {
        Self::from_bigint(v)
    }
}

impl From<BigUint> for BigIndex {
    fn from(v: BigUint) -> Self {
        Self::from_bigint(BigInt::from(v))
    }
}

impl Neg for &BigIndex {
    type Output = BigIndex;
    fn neg(self) -> BigIndex {
        BigIndex {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    exp: t.exp.clone(),
                    coeff: -&t.coeff,
                })
                .collect(),
        }
    }
}

impl Neg for BigIndex {
    type Output = BigIndex;
    fn neg(self) -> BigIndex {
        -&self
    }
}

impl Add for &BigIndex {
    type Output = BigIndex;
    fn add(self, rhs: &BigIndex) -> BigIndex {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        BigIndex::canonical(terms)
    }
}

impl Sub for &BigIndex {
    type Output = BigIndex;
    fn sub(self, rhs: &BigIndex) -> BigIndex {
        self + &(-rhs)
    }
}

impl Mul for &BigIndex {
    type Output = BigIndex;
    fn mul(self, rhs: &BigIndex) -> BigIndex {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(Term {
                    exp: &a.exp + &b.exp,
                    coeff: &a.coeff * &b.coeff,
                });
            }
        }
        BigIndex::canonical(terms)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<BigIndex> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: BigIndex) -> BigIndex {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&BigIndex> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: &BigIndex) -> BigIndex {
                (&self).$m(rhs)
            }
        }
        impl $tr<BigIndex> for &BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: BigIndex) -> BigIndex {
                self.$m(&rhs)
            }
        }
        impl $tr<i64> for &BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: i64) -> BigIndex {
                self.$m(&BigIndex::from(rhs))
            }
        }
        impl $tr<i64> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: i64) -> BigIndex {
                (&self).$m(&BigIndex::from(rhs))
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Ord for BigIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // single-word fast path
        if let (Some(a), Some(b)) = (self.small(), other.small()) {
            return a.cmp(&b);
        }
        (self - other).signum()
    }
}

impl BigIndex {
    fn small(&self) -> Option<i128> {
        match self.terms.as_slice() {
            [] => Some(0),
            [t] => {
                let e = t.exp.to_u32()?;
                if e > 60 || t.coeff.bits() > 60 {
                    return None;
                }
                Some(t.coeff.to_i128()? << e)
            }
            _ => None,
        }
    }
}

impl PartialOrd for BigIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for BigIndex {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BigIndex {}

impl PartialEq<i64> for BigIndex {
    fn eq(&self, other: &i64) -> bool {
        *self == BigIndex::from(*other)
    }
}

impl fmt::Display for BigIndex {
    /// Decimal when the value is small enough to expand, otherwise the
    /// canonical sum `c*2^e + ...` from the top term down.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.to_bigint() {
            return write!(f, "{v}");
        }
        for (i, t) in self.terms.iter().rev().enumerate() {
            let (neg, mag) = (t.coeff.is_negative(), t.coeff.abs());
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if t.exp.is_zero() {
                write!(f, "{mag}")?;
            } else {
                write!(f, "{mag}*2^{}", t.exp)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for BigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for BigIndex {
    type Err = ParseIndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseIndexError(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut terms = Vec::new();
        let mut rest = compact.as_str();
        let mut first = true;
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'-' => (Sign::Minus, &rest[1..]),
                b'+' if !first => (Sign::Plus, &rest[1..]),
                _ if first => (Sign::Plus, rest),
                _ => return Err(err()),
            };
            first = false;
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let (token, tail) = body.split_at(end);
            rest = tail;
            let (coeff, exp) = match token.split_once("*2^") {
                Some((c, e)) => (
                    c.parse::<BigUint>().map_err(|_| err())?,
                    e.parse::<BigUint>().map_err(|_| err())?,
                ),
                None => (token.parse::<BigUint>().map_err(|_| err())?, BigUint::zero()),
            };
            terms.push(Term {
                exp,
                coeff: BigInt::from_biguint(sign, coeff),
            });
        }
        Ok(Self::canonical(terms))
    }
}

impl Serialize for BigIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BigIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
