//! Summation helpers.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

/// Exact sum of `f64` values, rounded once on read.
///
/// Every finite double is an integer multiple of `2^−1074`, so the running
/// total is kept as an integer in those units. Two sums of the same multiset
/// of terms, or of `n·x` against `x` added `n` times, agree bit for bit.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    units: BigInt,
    non_finite: Option<f64>,
}

const UNIT_SHIFT: i64 = 1074;

fn decompose(x: f64) -> (BigInt, u64) {
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    let m = BigInt::from(mant);
    (if neg { -m } else { m }, (e + UNIT_SHIFT) as u64)
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        self.add_times(x, &BigInt::from(1));
    }

    /// Adds `count · x` exactly.
    pub fn add_times(&mut self, x: f64, count: &BigInt) {
        if x == 0.0 || count.is_zero() {
            return;
        }
        if !x.is_finite() {
            self.non_finite = Some(match self.non_finite {
                Some(y) => y + x,
                None => x,
            });
            return;
        }
        let (m, shift) = decompose(x);
        self.units += (m * count) << shift;
    }

    pub fn value(&self) -> f64 {
        if let Some(y) = self.non_finite {
            return y;
        }
        if self.units.is_zero() {
            return 0.0;
        }
        let bits = self.units.bits();
        if bits <= 64 {
            // the conversion rounds once; scaling a value with integral
            // ulp by 2^−1074 is exact
            let v = self.units.to_i128().expect("at most 64 bits") as f64;
            return v * exp2i(-UNIT_SHIFT);
        }
        // keep 64 leading bits plus a sticky bit so the integer-to-float
        // conversion rounds exactly as the full value would
        let drop = bits - 64;
        let top = &self.units >> drop;
        let sticky = i128::from((&top << drop) != self.units);
        let top = top.to_i128().expect("64 significant bits");
        let v = ((top << 1) | sticky) as f64;
        // the result is at least 2^−1010, so this scaling is exact
        v * exp2i(drop as i64 - 1 - UNIT_SHIFT)
    }
}

/// `2^e` for any integer `e` where the result is representable or rounds
/// to zero/infinity.
fn exp2i(e: i64) -> f64 {
    if e > 1023 {
        return f64::INFINITY;
    }
    if e < -1074 {
        return 0.0;
    }
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_sum_basics() {
        let mut s = ExactSum::new();
        for _ in 0..10 {
            s.add(0.1);
        }
        let mut t = ExactSum::new();
        t.add_times(0.1, &BigInt::from(10));
        assert_eq!(s.value(), t.value());
        // exact value of 10 × fl(0.1) rounds to 1.0
        assert_eq!(s.value(), 1.0);
        let mut u = ExactSum::new();
        u.add(1e300);
        u.add(1.0);
        u.add(-1e300);
        assert_eq!(u.value(), 1.0);
        let mut v = ExactSum::new();
        v.add(f64::from_bits(1));
        assert_eq!(v.value(), f64::from_bits(1));
        v.add(f64::NEG_INFINITY);
        assert_eq!(v.value(), f64::NEG_INFINITY);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = NeumaierSum::new();
        s.add(1.0);
        s.add(1e100);
        s.add(1.0);
        s.add(-1e100);
        assert_eq!(s.value(), 2.0);
    }

    proptest! {
        #[test]
        fn single_term_is_identity(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let mut s = ExactSum::new();
            s.add(x);
            prop_assert_eq!(s.value(), x);
        }

        #[test]
        fn two_terms_round_once(a in -1e10f64..1e10, b in -1e10f64..1e10) {
            let mut s = ExactSum::new();
            s.add(a);
            s.add(b);
            // a + b in f64 is the correctly rounded exact sum
            prop_assert_eq!(s.value(), a + b);
        }
    }
}
