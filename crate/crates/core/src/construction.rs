//! Inductive level construction for the negative-index half of the product
//! measure.
//!
//! Each level `t` carries `(k_t, λ_t, n_t, N_t, m_t, M_t)`:
//!
//! * level 1 is fixed: `λ₁ = 2, n₁ = 2, m₁ = 4, N₁ = 3, M₁ = 7` with `M₀ = 1`;
//! * `k_t = ⌊log₂(M_{t−1}/ε_t)⌋ + 1` and `λ_t = e^(2^(−k_t))`, which forces
//!   `λ_t^{M_{t−1}} < e^{ε_t}`;
//! * `n_t` is the least positive integer with `λ_t^{n_t/4} ≥ max{a² : a ∈ A_{t−1}}`
//!   where `max A_{t−1} = Π_{u<t} λ_u^{n_u}`;
//! * `N_t = M_{t−1} + n_t`, `m_t = t·N_t·(2 + 2^{t·N_t})`, `M_t = N_t + m_t`.
//!
//! Every quantity is exact: indices are [`BigIndex`] values and the λ's are
//! [`ScaledExponent`]s, so comparisons never round.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{PrecisionExhausted, ScaledExponent, DEFAULT_MAX_PRECISION};
use crate::index::BigIndex;
use crate::measure::{Block, BlockRule, Factor, LevelTail, ProductMeasure, TailDescriptor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructionError {
    #[error("level count must be at least 1")]
    EmptyRequest,
    #[error("level {level}: {source}")]
    PrecisionExhausted {
        level: u32,
        #[source]
        source: PrecisionExhausted,
    },
    #[error("λ must exceed 1, got {0}")]
    LambdaNotAboveOne(ScaledExponent),
    #[error("invalid epsilon policy `{0}`")]
    InvalidEpsilon(String),
}

/// Summable sequence `ε_t = base^(−t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EpsilonPolicy {
    base: u32,
}

impl EpsilonPolicy {
    pub const DYADIC: Self = Self { base: 2 };

    pub fn inverse_power(base: u32) -> Result<Self, ConstructionError> {
        if base < 2 {
            return Err(ConstructionError::InvalidEpsilon(format!("base {base}")));
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// `1/ε_t` as an exact integer.
    pub fn reciprocal(&self, t: u32) -> BigIndex {
        BigIndex::from(num_traits::pow(BigInt::from(self.base), t as usize))
    }

    pub fn epsilon(&self, t: u32) -> f64 {
        (self.base as f64).powi(-(t as i32))
    }

    /// `Σ_t ε_t` for the geometric family.
    pub fn total(&self) -> f64 {
        1.0 / (self.base as f64 - 1.0)
    }

    pub fn is_dyadic(&self) -> bool {
        self.base.is_power_of_two()
    }
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        Self::DYADIC
    }
}

impl fmt::Display for EpsilonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.base.is_power_of_two() {
            let s = self.base.trailing_zeros();
            if s == 1 {
                write!(f, "dyadic:2^-t")
            } else {
                write!(f, "dyadic:2^-{s}t")
            }
        } else {
            write!(f, "inverse-power:{}", self.base)
        }
    }
}

impl FromStr for EpsilonPolicy {
    type Err = ConstructionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConstructionError::InvalidEpsilon(s.to_string());
        if let Some(rest) = s.strip_prefix("dyadic:2^-") {
            let scale = rest.strip_suffix('t').ok_or_else(bad)?;
            let scale: u32 = if scale.is_empty() {
                1
            } else {
                scale.parse().map_err(|_| bad())?
            };
            if scale == 0 || scale > 31 {
                return Err(bad());
            }
            return Self::inverse_power(1 << scale);
        }
        if let Some(rest) = s.strip_prefix("inverse-power:") {
            return Self::inverse_power(rest.parse().map_err(|_| bad())?);
        }
        Err(bad())
    }
}

impl TryFrom<String> for EpsilonPolicy {
    type Error = ConstructionError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EpsilonPolicy> for String {
    fn from(e: EpsilonPolicy) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub t: u32,
    /// Dyadic exponent of `λ_t = e^(2^(−k_t))`; zero for the base level.
    pub k: u64,
    pub lambda: ScaledExponent,
    pub n: BigIndex,
    #[serde(rename = "N")]
    pub big_n: BigIndex,
    pub m: BigIndex,
    #[serde(rename = "M")]
    pub big_m: BigIndex,
}

impl LevelParams {
    pub fn base() -> Self {
        Self {
            t: 1,
            k: 0,
            lambda: ScaledExponent::power_of_two(1),
            n: BigIndex::from(2),
            big_n: BigIndex::from(3),
            m: BigIndex::from(4),
            big_m: BigIndex::from(7),
        }
    }

    /// `ln λ_t` as `f64` (may underflow to 0 for deep levels).
    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln_f64()
    }

    /// The coordinate marginal `(λ/(1+λ), 1/(1+λ))` used on this level's λ-block.
    pub fn lambda_factor(&self) -> Factor {
        let x = self.log_lambda();
        Factor::new(1.0 / (1.0 + (-x).exp())).expect("logistic value lies in [0, 1]")
    }
}

fn m_prev(levels: &[LevelParams]) -> BigIndex {
    levels
        .last()
        .map(|l| l.big_m.clone())
        .unwrap_or_else(BigIndex::one)
}

/// `k_t = ⌊log₂(M_{t−1}·base^t)⌋ + 1`, i.e. the bit length of `M_{t−1}·base^t`.
pub fn choose_k(prev_big_m: &BigIndex, t: u32, eps: &EpsilonPolicy) -> BigUint {
    (prev_big_m * &eps.reciprocal(t)).bits()
}

/// `max A_{t−1} = Π_u λ_u^{n_u}`; every λ exceeds 1 so the extreme exponents win.
pub fn a_max(levels: &[LevelParams]) -> Result<ScaledExponent, ConstructionError> {
    let mut acc = ScaledExponent::one();
    for l in levels {
        let n = l.n.to_bigint().ok_or_else(|| ConstructionError::PrecisionExhausted {
            level: l.t,
            source: PrecisionExhausted {
                what: format!("n_{} has no finite binary expansion in memory", l.t),
                bits: 0,
            },
        })?;
        acc = acc.mul(&l.lambda.pow(&n));
    }
    Ok(acc)
}

/// The least `n` with `λ^{n/4} ≥ (max A)²` and the two comparisons that certify it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NChoice {
    pub n: BigIndex,
    /// `λ^n` against `(max A)^8`; never `Less`.
    pub at_n: Ordering,
    /// Same comparison at `n − 1`; `None` when `n = 1`.
    pub at_n_minus_one: Option<Ordering>,
}

pub fn choose_n(
    levels: &[LevelParams],
    lambda: &ScaledExponent,
    max_precision: u64,
) -> Result<NChoice, ConstructionError> {
    let t = levels.len() as u32 + 1;
    let max_a = a_max(levels)?;
    choose_n_for(&max_a, lambda, max_precision).map_err(|e| match e {
        ConstructionError::PrecisionExhausted { source, .. } => {
            ConstructionError::PrecisionExhausted { level: t, source }
        }
        other => other,
    })
}

/// Same as [`choose_n`] for an explicit `max A`.
pub fn choose_n_for(
    max_a: &ScaledExponent,
    lambda: &ScaledExponent,
    max_precision: u64,
) -> Result<NChoice, ConstructionError> {
    let wrap = |source| ConstructionError::PrecisionExhausted { level: 0, source };
    if lambda.compare(&ScaledExponent::one(), max_precision).map_err(wrap)? != Ordering::Greater {
        return Err(ConstructionError::LambdaNotAboveOne(lambda.clone()));
    }
    // λ^{n/4} ≥ a² ⇔ λ^n ≥ a^8
    let target = max_a.pow(&BigInt::from(8));
    let n = if lambda.compare(&target, max_precision).map_err(wrap)? != Ordering::Less {
        BigInt::one()
    } else {
        ceil_log_ratio(&target, lambda, max_precision).map_err(wrap)?
    };
    let at_n = lambda.pow(&n).compare(&target, max_precision).map_err(wrap)?;
    let at_n_minus_one = if n.is_one() {
        None
    } else {
        Some(
            lambda
                .pow(&(&n - 1))
                .compare(&target, max_precision)
                .map_err(wrap)?,
        )
    };
    Ok(NChoice {
        n: BigIndex::from(n),
        at_n,
        at_n_minus_one,
    })
}

/// `⌈ln(target) / ln(base)⌉` for `target > base > 1`.
fn ceil_log_ratio(
    target: &ScaledExponent,
    base: &ScaledExponent,
    max_precision: u64,
) -> Result<BigInt, PrecisionExhausted> {
    let k = target.exp_shift.max(base.exp_shift);
    let (ta, tb) = (&target.two_pow, &target.exp_num << (k - target.exp_shift));
    let (ba, bb) = (&base.two_pow, &base.exp_num << (k - base.exp_shift));
    // rational ratio when (ta, tb) ∥ (ba, bb); ln 2 is irrational
    if ta * &bb == &tb * ba {
        let (num, den) = if !ba.is_zero() {
            (ta.clone(), ba.clone())
        } else {
            (tb.clone(), bb.clone())
        };
        return Ok(num.div_ceil(&den));
    }
    let mut prec = (k + ta.bits().max(ba.bits()) + 64).max(128);
    loop {
        if prec > max_precision {
            return Err(PrecisionExhausted {
                what: format!("⌈ln({target}) / ln({base})⌉"),
                bits: prec,
            });
        }
        let (tl, tu) = target.scaled_ln_enclosure(prec);
        let (bl, bu) = base.scaled_ln_enclosure(prec);
        if bl > BigInt::zero() && tl > BigInt::zero() {
            let lo = tl.div_ceil(&bu);
            let hi = tu.div_ceil(&bl);
            if lo == hi {
                return Ok(lo);
            }
        }
        prec *= 2;
    }
}

/// `m_t = t·N_t·(2 + 2^{t·N_t})`.
pub fn m_for(t: u32, big_n: &BigIndex) -> Result<BigIndex, ConstructionError> {
    let tn = big_n * &BigIndex::from(t);
    let exp = tn.to_biguint().ok_or_else(|| ConstructionError::PrecisionExhausted {
        level: t,
        source: PrecisionExhausted {
            what: format!("2^(t·N_{t}) with t·N_{t} = {tn}"),
            bits: 0,
        },
    })?;
    Ok(&tn * &(BigIndex::from(2) + BigIndex::pow2(exp)))
}

pub fn next_level(
    prev: &[LevelParams],
    eps: &EpsilonPolicy,
    max_precision: u64,
) -> Result<LevelParams, ConstructionError> {
    if prev.is_empty() {
        return Ok(LevelParams::base());
    }
    let t = prev.len() as u32 + 1;
    let big_m_prev = m_prev(prev);
    let k_big = choose_k(&big_m_prev, t, eps);
    let k = k_big.to_u64().ok_or_else(|| ConstructionError::PrecisionExhausted {
        level: t,
        source: PrecisionExhausted {
            what: format!(
                "n_{t} (k_{t} ≈ 2^{}, so λ_{t} = e^(2^-k_{t}) needs ln 2 to about k_{t} bits)",
                k_big.bits() - 1
            ),
            bits: max_precision,
        },
    })?;
    let lambda = ScaledExponent::dyadic_root_of_e(k);
    let choice = choose_n(prev, &lambda, max_precision)?;
    let big_n = &big_m_prev + &choice.n;
    let m = m_for(t, &big_n)?;
    let big_m = &big_n + &m;
    Ok(LevelParams {
        t,
        k,
        lambda,
        n: choice.n,
        big_n,
        m,
        big_m,
    })
}

/// Levels `1..=count`.
pub fn build_levels(
    count: usize,
    eps: &EpsilonPolicy,
    max_precision: u64,
) -> Result<Vec<LevelParams>, ConstructionError> {
    if count == 0 {
        return Err(ConstructionError::EmptyRequest);
    }
    let mut levels = Vec::with_capacity(count);
    for _ in 0..count {
        let level = next_level(&levels, eps, max_precision)?;
        levels.push(level);
    }
    Ok(levels)
}

/// Outcome of the growth inequality `m_t/n − N_t > 2^{k·N_t}` for one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub t: u32,
    pub pass: bool,
    /// First failing `(k, n)`.
    pub witness: Option<(u32, BigIndex)>,
}

/// Checks the growth inequality for all `k < t` at the worst case `n = N_t`
/// (the left side decreases in `n`).
pub fn verify_growth(levels: &[LevelParams]) -> Vec<GrowthCheck> {
    levels
        .iter()
        .map(|l| {
            let n = &l.big_n;
            let witness = (1..l.t).find_map(|k| {
                let exp = (&l.big_n * &BigIndex::from(k)).to_biguint()?;
                // m/n − N > 2^{kN}  ⇔  m − n·N > n·2^{kN}
                let lhs = &l.m - &(n * &l.big_n);
                let rhs = n * &BigIndex::pow2(exp);
                (lhs <= rhs).then(|| (k, n.clone()))
            });
            GrowthCheck {
                t: l.t,
                pass: witness.is_none(),
                witness,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub t: u32,
    pub checks: Vec<ConstraintCheck>,
}

impl LevelReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Re-derives every defining constraint of each level from scratch.
pub fn verify_levels(
    levels: &[LevelParams],
    eps: &EpsilonPolicy,
    max_precision: u64,
) -> Result<Vec<LevelReport>, ConstructionError> {
    let growth = verify_growth(levels);
    let mut reports = Vec::with_capacity(levels.len());
    for (i, l) in levels.iter().enumerate() {
        let prev = &levels[..i];
        let big_m_prev = m_prev(prev);
        let mut checks = vec![
            ConstraintCheck {
                name: "N = M_prev + n",
                pass: l.big_n == &big_m_prev + &l.n,
            },
            ConstraintCheck {
                name: "M = N + m",
                pass: l.big_m == &l.big_n + &l.m,
            },
            ConstraintCheck {
                name: "growth",
                pass: growth[i].pass,
            },
        ];
        if l.t == 1 {
            checks.push(ConstraintCheck {
                name: "base values",
                pass: *l == LevelParams::base(),
            });
        } else {
            let k_ok = choose_k(&big_m_prev, l.t, eps) == BigUint::from(l.k);
            // λ^{M_prev} < e^{ε}  ⇔  M_prev·2^{-k} < base^{-t}
            let lambda_ok =
                &big_m_prev * &eps.reciprocal(l.t) < BigIndex::pow2(BigUint::from(l.k));
            let m_ok = m_for(l.t, &l.big_n).map(|m| m == l.m).unwrap_or(false);
            let decreasing = l
                .lambda
                .compare(&levels[i - 1].lambda, max_precision)
                .map(|o| o == Ordering::Less)
                .unwrap_or(false);
            let above_one = l
                .lambda
                .compare(&ScaledExponent::one(), max_precision)
                .map(|o| o == Ordering::Greater)
                .unwrap_or(false);
            let dyadic = prev.iter().filter(|u| u.t >= 2).all(|u| {
                let power = BigInt::one() << (l.k - u.k);
                u.lambda == l.lambda.pow(&power)
            });
            let minimal = match choose_n_for(&a_max(prev)?, &l.lambda, max_precision) {
                Ok(c) => {
                    c.n == l.n
                        && c.at_n != Ordering::Less
                        && c.at_n_minus_one.is_none_or(|o| o == Ordering::Less)
                }
                Err(_) => false,
            };
            checks.extend([
                ConstraintCheck {
                    name: "k = floor(log2(M_prev/eps)) + 1",
                    pass: k_ok,
                },
                ConstraintCheck {
                    name: "lambda^M_prev < e^eps",
                    pass: lambda_ok,
                },
                ConstraintCheck {
                    name: "m = tN(2 + 2^(tN))",
                    pass: m_ok,
                },
                ConstraintCheck {
                    name: "lambda decreasing",
                    pass: decreasing,
                },
                ConstraintCheck {
                    name: "lambda > 1",
                    pass: above_one,
                },
                ConstraintCheck {
                    name: "dyadic compatibility",
                    pass: dyadic,
                },
                ConstraintCheck {
                    name: "n minimal",
                    pass: minimal,
                },
            ]);
        }
        reports.push(LevelReport { t: l.t, checks });
    }
    Ok(reports)
}

/// Lays the levels out on the negative half-line: for each level `u` the
/// λ-block `[−N_u+1, −M_{u−1}]` and the fair block `[−M_u+1, −N_u]`;
/// indices `≥ 0` are fair.
pub fn measure_from_levels(levels: &[LevelParams], eps: &EpsilonPolicy) -> ProductMeasure {
    let mut blocks = Vec::with_capacity(2 * levels.len());
    let mut big_m_prev = BigIndex::one();
    for l in levels {
        let lambda_block = Block {
            lo: -&l.big_n + 1,
            hi: -&big_m_prev,
            factor: l.lambda_factor(),
        };
        let fair_block = Block {
            lo: -&l.big_m + 1,
            hi: -&l.big_n,
            factor: Factor::FAIR,
        };
        blocks.push(lambda_block);
        blocks.push(fair_block);
        big_m_prev = l.big_m.clone();
    }
    blocks.reverse();
    let tail = TailDescriptor::LevelParameterized(LevelTail {
        declared_limit: Factor::FAIR,
        eps: *eps,
        levels: Arc::new(levels.to_vec()),
    });
    let rule = BlockRule::new(blocks, Factor::FAIR, tail).expect("level blocks are contiguous");
    ProductMeasure::new(rule)
}

/// Certified majorants for the part of a level-built measure that lies
/// below its explicit coverage.
///
/// With `x_t = ln λ_t = 2^(−k_t)`, a λ-factor differs from the fair factor
/// by at most `x_t²/4` in squared Hellinger terms. The minimal choice of
/// `n_t` gives `n_t ≤ 2^(k_t+3)·L_{t−1} + 1` with `L = ln max A`, and
/// `L_t ≤ 9·L_{t−1} + 1`. For `t ≥ 3` consecutive `k`'s differ by at least 4
/// (since `M_t ≥ 2^{M_{t−1}}`), so both series below are dominated by
/// geometric ones once two levels are known explicitly.
impl LevelTail {
    fn explicit_levels(&self) -> Vec<LevelParams> {
        let mut levels: Vec<LevelParams> = self.levels.as_ref().clone();
        while levels.len() < 2 {
            let next = next_level(&levels, &self.eps, DEFAULT_MAX_PRECISION)
                .expect("the first two levels are always constructible");
            levels.push(next);
        }
        levels
    }

    fn next_k_log2(&self, levels: &[LevelParams]) -> f64 {
        let t = levels.len() as u32 + 1;
        let k = choose_k(&levels.last().unwrap().big_m, t, &self.eps);
        k.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Upper bound on `Σ_{k below coverage} d(P_k, declared limit)`.
    pub fn limit_deviation_bound(&self) -> f64 {
        let own = self.levels.len();
        let levels = self.explicit_levels();
        let mut total = 0.0;
        for l in &levels[own..] {
            let x = l.log_lambda();
            total += l.n.to_f64() * x * x / 4.0;
        }
        let k = self.next_k_log2(&levels);
        let big_l = a_max(&levels)
            .map(|a| a.ln_f64())
            .unwrap_or(f64::INFINITY)
            .max(1.0);
        // first term 2^{1−k}·L + 2^{−2k−2}, ratio ≤ 10/16
        let first = (1.0 - k + big_l.log2()).exp2() + (-2.0 * k - 2.0).exp2();
        total += first * 8.0 / 3.0;
        round_up_bound(total)
    }

    /// Upper bound on the one-step variation `Σ_j d(P_j, P_{j−1})` over all
    /// jumps at or below the coverage boundary.
    pub fn jump_variation_bound(&self) -> f64 {
        let own = self.levels.len();
        let levels = self.explicit_levels();
        let mut total = 0.0;
        for l in &levels[own..] {
            let x = l.log_lambda();
            total += x * x / 2.0;
        }
        let k = self.next_k_log2(&levels);
        total += (-2.0 * k - 1.0).exp2() * 256.0 / 255.0;
        round_up_bound(total)
    }
}

/// Pads a floating bound so that rounding never makes it unsound.
pub(crate) fn round_up_bound(x: f64) -> f64 {
    if x.is_nan() {
        return f64::INFINITY;
    }
    let padded = x * (1.0 + 1e-9);
    if padded > 0.0 {
        padded
    } else {
        f64::from_bits(1)
    }
}
