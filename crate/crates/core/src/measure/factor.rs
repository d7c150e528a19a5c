use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("p0 = {0} is not a probability")]
    OutOfRange(f64),
    #[error("p0 + p1 = {0} + {1} differs from 1 by more than one ulp")]
    NotNormalized(f64, f64),
}

/// A probability pair `(p0, p1)` on `{0, 1}`.
///
/// `p1` is stored as `1 − p0` rounded once (or as the exchanged pair of such
/// a factor); for every `p0 ∈ [0, 1]` the floating sum `p0 + p1` is then
/// exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorRepr", into = "FactorRepr")]
pub struct Factor {
    p0: f64,
    p1: f64,
}

#[derive(Serialize, Deserialize)]
struct FactorRepr {
    p0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p1: Option<f64>,
}

impl TryFrom<FactorRepr> for Factor {
    type Error = FactorError;
    fn try_from(r: FactorRepr) -> Result<Self, FactorError> {
        match r.p1 {
            Some(p1) => Factor::from_pair(r.p0, p1),
            None => Factor::new(r.p0),
        }
    }
}

impl From<Factor> for FactorRepr {
    fn from(f: Factor) -> Self {
        let p1 = (f.p1 != 1.0 - f.p0).then_some(f.p1);
        FactorRepr { p0: f.p0, p1 }
    }
}

fn sq_gap(a: f64, b: f64) -> f64 {
    // (√a − √b)² = (a − b)² / (√a + √b)², free of cancellation
    let s = a.sqrt() + b.sqrt();
    if s == 0.0 {
        0.0
    } else {
        let d = (a - b) / s;
        d * d
    }
}

impl Factor {
    pub const FAIR: Factor = Factor { p0: 0.5, p1: 0.5 };

    pub fn new(p0: f64) -> Result<Self, FactorError> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(FactorError::OutOfRange(p0));
        }
        Ok(Self { p0, p1: 1.0 - p0 })
    }

    /// Accepts an explicit pair when it is normalized to within one ulp of 1.
    /// A pair whose floating sum is exactly 1 is kept as given.
    pub fn from_pair(p0: f64, p1: f64) -> Result<Self, FactorError> {
        let f = Self::new(p0)?;
        if !((p0 + p1) - 1.0).abs().le(&f64::EPSILON) || !(0.0..=1.0).contains(&p1) {
            return Err(FactorError::NotNormalized(p0, p1));
        }
        if p0 + p1 == 1.0 {
            return Ok(Self { p0, p1 });
        }
        Ok(f)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn prob(&self, bit: bool) -> f64 {
        if bit {
            self.p1
        } else {
            self.p0
        }
    }

    /// The same factor with the symbols 0 and 1 exchanged; an exact involution.
    pub fn swapped(&self) -> Self {
        Self {
            p0: self.p1,
            p1: self.p0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.p0 == 0.0 || self.p1 == 0.0
    }

    /// `√(p0 q0) + √(p1 q1)`.
    pub fn affinity(&self, other: &Self) -> f64 {
        ((self.p0 * other.p0).sqrt() + (self.p1 * other.p1).sqrt()).min(1.0)
    }

    /// `(√p0 − √q0)² + (√p1 − √q1)²`.
    pub fn distance_term(&self, other: &Self) -> f64 {
        sq_gap(self.p0, other.p0) + sq_gap(self.p1, other.p1)
    }

    /// `ln h` computed as `ln(1 − d/2)` so that nearly equal factors keep
    /// full relative accuracy.
    pub fn log_affinity(&self, other: &Self) -> f64 {
        let d = self.distance_term(other);
        if d >= 2.0 && self.affinity(other) == 0.0 {
            return f64::NEG_INFINITY;
        }
        (-d / 2.0).ln_1p()
    }
}

pub fn factor_affinity(p: &Factor, q: &Factor) -> f64 {
    p.affinity(q)
}

pub fn factor_distance_term(p: &Factor, q: &Factor) -> f64 {
    p.distance_term(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(p0: f64) -> Factor {
        Factor::new(p0).unwrap()
    }

    #[test]
    fn reference_values() {
        // √0.45 + √0.05 = 0.894427190999915878...
        let h = f(0.9).affinity(&Factor::FAIR);
        assert!((h - 0.894_427_190_999_915_9).abs() < 1e-15);
        let d = f(0.9).distance_term(&Factor::FAIR);
        assert!((d - 0.211_145_618_000_168_24).abs() < 1e-15);
        assert_eq!(f(1.0).affinity(&f(0.0)), 0.0);
        assert_eq!(f(1.0).distance_term(&f(0.0)), 2.0);
        assert_eq!(f(1.0).log_affinity(&f(0.0)), f64::NEG_INFINITY);
        assert_eq!(Factor::FAIR.distance_term(&Factor::FAIR), 0.0);
        assert!((f(0.9).log_affinity(&Factor::FAIR) + 0.111_571_775_657_104_88).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid() {
        assert!(Factor::new(1.5).is_err());
        assert!(Factor::new(f64::NAN).is_err());
        assert!(Factor::from_pair(0.3, 0.6).is_err());
        assert!(Factor::from_pair(0.3, 0.7).is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let x = f(0.1 + 0.2);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(serde_json::from_str::<Factor>(&s).unwrap(), x);
        assert!(serde_json::from_str::<Factor>(r#"{"p0":2.0}"#).is_err());
    }

    proptest! {
        #[test]
        fn sum_is_exactly_one(p in 0.0f64..=1.0) {
            let x = f(p);
            prop_assert_eq!(x.p0() + x.p1(), 1.0);
        }

        #[test]
        fn distance_matches_affinity(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let (a, b) = (f(p), f(q));
            let h = a.affinity(&b);
            let d = a.distance_term(&b);
            prop_assert!((d - 2.0 * (1.0 - h)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&h));
            prop_assert_eq!(h, b.affinity(&a));
            prop_assert_eq!(d, b.distance_term(&a));
            prop_assert_eq!(d, a.swapped().distance_term(&b.swapped()));
        }

        #[test]
        fn affinity_one_iff_equal(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let d = f(p).distance_term(&f(q));
            prop_assert_eq!(d == 0.0, p == q);
        }
    }
}
