use serde::Serialize;

use super::factor::Factor;
use super::product::ProductMeasure;
use super::rule::{Excursions, LevelTail, SegmentBudgetExceeded, TailDescriptor};
use crate::construction::round_up_bound;
use crate::index::BigIndex;
use crate::numeric::ExactSum;

/// Default cap on block-intersection segments per evaluation.
pub const DEFAULT_SEGMENT_BUDGET: usize = 1 << 20;

/// Aim for excursion sweeps of about this many segments before falling back
/// on the variation majorant.
const EXCURSION_SWEEP_TARGET: f64 = 65_536.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("iteration budget exceeded: {0}")]
    IterationBudgetExceeded(#[from] SegmentBudgetExceeded),
    #[error("window half-width must be nonnegative, got {0}")]
    NegativeWindow(BigIndex),
    #[error("degenerate factor at coordinate {0}: the affinity vanishes")]
    DegenerateFactor(BigIndex),
    #[error("undecidable: {0}")]
    Undecidable(String),
}

/// A run of coordinates on which both measures are constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSegment {
    pub lo: BigIndex,
    pub hi: BigIndex,
    pub p: Factor,
    pub q: Factor,
}

impl PairSegment {
    pub fn len(&self) -> BigIndex {
        &self.hi - &self.lo + 1
    }
}

/// Intersects the segment lists of `p` and `q` over `[lo, hi]`.
pub fn paired_segments(
    p: &ProductMeasure,
    q: &ProductMeasure,
    lo: &BigIndex,
    hi: &BigIndex,
    budget: usize,
) -> Result<Vec<PairSegment>, SegmentBudgetExceeded> {
    let a = p.segments(lo, hi, budget)?;
    let b = q.segments(lo, hi, budget)?;
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut cur = lo.clone();
    while i < a.len() && j < b.len() {
        let end = a[i].hi.clone().min(b[j].hi.clone());
        if out.len() >= budget {
            return Err(SegmentBudgetExceeded(budget));
        }
        out.push(PairSegment {
            lo: cur,
            hi: end.clone(),
            p: a[i].factor,
            q: b[j].factor,
        });
        if a[i].hi == end {
            i += 1;
        }
        if b[j].hi == end {
            j += 1;
        }
        cur = end + 1;
    }
    Ok(out)
}

fn window(n: &BigIndex) -> Result<(BigIndex, BigIndex), MeasureError> {
    if n.is_negative() {
        return Err(MeasureError::NegativeWindow(n.clone()));
    }
    Ok((-n, n.clone()))
}

fn len_bigint(s: &PairSegment) -> Option<num_bigint::BigInt> {
    s.len().to_bigint()
}

/// `Σ_{k=lo}^{hi} d(P_k, Q_k)`.
pub fn distance_over(
    p: &ProductMeasure,
    q: &ProductMeasure,
    lo: &BigIndex,
    hi: &BigIndex,
    budget: usize,
) -> Result<f64, MeasureError> {
    let mut sum = ExactSum::new();
    for s in paired_segments(p, q, lo, hi, budget)? {
        let d = s.p.distance_term(&s.q);
        if d == 0.0 {
            continue;
        }
        match len_bigint(&s) {
            Some(n) => sum.add_times(d, &n),
            None => sum.add(f64::INFINITY),
        }
    }
    Ok(sum.value())
}

/// `Σ_{k=lo}^{hi} ln h(P_k, Q_k)`; `−∞` if some coordinate is singular.
pub fn log_affinity_over(
    p: &ProductMeasure,
    q: &ProductMeasure,
    lo: &BigIndex,
    hi: &BigIndex,
    budget: usize,
) -> Result<f64, MeasureError> {
    let mut sum = ExactSum::new();
    for s in paired_segments(p, q, lo, hi, budget)? {
        let l = s.p.log_affinity(&s.q);
        if l == 0.0 {
            continue;
        }
        if l == f64::NEG_INFINITY {
            return Ok(l);
        }
        match len_bigint(&s) {
            Some(n) => sum.add_times(l, &n),
            None => sum.add(f64::NEG_INFINITY),
        }
    }
    Ok(sum.value())
}

/// `d_N(P, Q) = Σ_{k=−N}^{N} d(P_k, Q_k)`.
pub fn kakutani_distance_truncated(
    p: &ProductMeasure,
    q: &ProductMeasure,
    n: &BigIndex,
) -> Result<f64, MeasureError> {
    let (lo, hi) = window(n)?;
    distance_over(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)
}

/// `ρ_N(P, Q) = Π_{k=−N}^{N} h(P_k, Q_k)`, accumulated in log space.
pub fn hellinger_affinity(
    p: &ProductMeasure,
    q: &ProductMeasure,
    n: &BigIndex,
) -> Result<f64, MeasureError> {
    let (lo, hi) = window(n)?;
    Ok(log_affinity_over(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)?.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionalityReport {
    pub d: f64,
    pub neg_log_rho: f64,
    /// `min_k h(P_k, Q_k)` over the window.
    pub c: f64,
    /// `d/2 ≤ −log ρ`.
    pub lower_holds: bool,
    /// `−log ρ ≤ d/(2c)`.
    pub upper_holds: bool,
}

/// Checks `d_N/2 ≤ −log ρ_N ≤ d_N/(2c)` with `c = min h_k`.
pub fn proportionality_check(
    p: &ProductMeasure,
    q: &ProductMeasure,
    n: &BigIndex,
) -> Result<ProportionalityReport, MeasureError> {
    let (lo, hi) = window(n)?;
    let segs = paired_segments(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)?;
    let mut c: f64 = 1.0;
    for s in &segs {
        let h = s.p.affinity(&s.q);
        if h == 0.0 {
            return Err(MeasureError::DegenerateFactor(s.lo.clone()));
        }
        if s.p != s.q {
            c = c.min(h);
        }
    }
    let d = distance_over(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)?;
    let neg_log_rho = -log_affinity_over(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)?;
    // both sides are sums of the same number of rounded terms
    let slack = |x: f64| x.abs() * 1e-12;
    Ok(ProportionalityReport {
        d,
        neg_log_rho,
        c,
        lower_holds: d / 2.0 <= neg_log_rho + slack(neg_log_rho),
        upper_holds: neg_log_rho <= d / (2.0 * c) + slack(d / c),
    })
}

/// A lower-bound certificate for an infinite distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceWitness {
    /// Every coordinate above `from` contributes `per_term`.
    PositiveTail { from: BigIndex, per_term: f64 },
    /// Every coordinate below `below` contributes `per_term`.
    NegativeTail { below: BigIndex, per_term: f64 },
    /// Infinitely many disjoint coordinates contribute at least `per_term`.
    Recurring { description: String, per_term: f64 },
    /// Below `below` the terms repeat with this period and a positive sum.
    Periodic {
        below: BigIndex,
        period: BigIndex,
        per_period: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactDistance {
    /// `d ∈ [value, value + tail_bound]`.
    Finite { value: f64, tail_bound: f64 },
    Diverges { witness: DivergenceWitness },
}

impl ExactDistance {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExactDistance::Finite { .. })
    }
}

enum TailOutcome {
    Bound(f64),
    Diverges(DivergenceWitness),
}

/// Coordinates `≥ cut` are summed explicitly; those below are certified.
struct TailPlan {
    cut: BigIndex,
    tail: TailOutcome,
}

fn undecidable(msg: impl Into<String>) -> MeasureError {
    MeasureError::Undecidable(msg.into())
}

fn lowest_block_is(m: &ProductMeasure, f: Factor) -> bool {
    m.rule().blocks()[0].factor == f
}

fn plan_tail(p: &ProductMeasure, q: &ProductMeasure, budget: usize) -> Result<TailPlan, MeasureError> {
    use TailDescriptor::*;
    let (pt, qt) = (p.rule().neg_tail(), q.rule().neg_tail());
    for t in [pt, qt] {
        t.validate()
            .map_err(|e| undecidable(format!("invalid tail descriptor: {e}")))?;
    }
    let (plo, _) = p.coverage();
    let (qlo, _) = q.coverage();
    match (pt, qt) {
        (EventuallyConstant(a), EventuallyConstant(b)) => {
            let cut = plo.clone().min(qlo.clone());
            let d = a.distance_term(b);
            let tail = if d > 0.0 {
                TailOutcome::Diverges(DivergenceWitness::NegativeTail {
                    below: cut.clone(),
                    per_term: d,
                })
            } else {
                TailOutcome::Bound(0.0)
            };
            Ok(TailPlan { cut, tail })
        }
        (LevelParameterized(l), EventuallyConstant(c)) => level_vs_constant(p, l, q, *c),
        (EventuallyConstant(c), LevelParameterized(l)) => level_vs_constant(q, l, p, *c),
        (LevelParameterized(l), LevelParameterized(_)) if p.shares_rule(q) => {
            same_rule_levels(p, q, l, budget)
        }
        (TwoAccumulationPoints(e), TwoAccumulationPoints(_)) if p.shares_rule(q) => {
            same_rule_excursions(p, q, e, budget)
        }
        (TwoAccumulationPoints(e), EventuallyConstant(c))
        | (EventuallyConstant(c), TwoAccumulationPoints(e)) => {
            let worse = [e.low, e.high]
                .into_iter()
                .map(|f| f.distance_term(c))
                .fold(0.0, f64::max);
            Ok(TailPlan {
                cut: plo.clone().min(qlo.clone()),
                tail: TailOutcome::Diverges(DivergenceWitness::Recurring {
                    description: "excursion plateaus recur at a factor other than the constant tail".into(),
                    per_term: worse,
                }),
            })
        }
        _ => Err(undecidable(
            "no certificate relates these negative tails (different rules or descriptor kinds)",
        )),
    }
}

fn level_vs_constant(
    lev: &ProductMeasure,
    l: &LevelTail,
    other: &ProductMeasure,
    c: Factor,
) -> Result<TailPlan, MeasureError> {
    let (cut, _) = lev.coverage();
    let d = l.declared_limit.distance_term(&c);
    if d > 0.0 {
        return Ok(TailPlan {
            cut,
            tail: TailOutcome::Diverges(DivergenceWitness::Recurring {
                description: "every level contributes a block at the declared limit".into(),
                per_term: d,
            }),
        });
    }
    if !lowest_block_is(lev, l.declared_limit) {
        return Err(undecidable("lowest explicit block differs from the declared limit"));
    }
    if other.coverage().0 < cut {
        return Err(undecidable(
            "explicit blocks extend into the level-parameterized tail",
        ));
    }
    Ok(TailPlan {
        cut,
        tail: TailOutcome::Bound(l.limit_deviation_bound()),
    })
}

fn relative_shift(p: &ProductMeasure, q: &ProductMeasure) -> BigIndex {
    q.shift_offset() - p.shift_offset()
}

fn small_shift(s: &BigIndex) -> Result<u64, MeasureError> {
    s.abs()
        .to_u64()
        .filter(|&v| v < 1 << 40)
        .ok_or_else(|| undecidable(format!("relative shift {s} is too large to certify")))
}

/// Tail of `Σ d(v_i, v_{i−s})` for one rule read at two offsets.
///
/// Writing `v` for the vector `(√p0, √p1)`, each difference telescopes over
/// `|s|` one-step jumps, so by Cauchy–Schwarz every jump is charged at most
/// `s²` times its own squared length.
fn same_rule_levels(
    p: &ProductMeasure,
    q: &ProductMeasure,
    l: &LevelTail,
    budget: usize,
) -> Result<TailPlan, MeasureError> {
    let s = relative_shift(p, q);
    let cut = p.coverage().0.max(q.coverage().0);
    if s.is_zero() {
        return Ok(TailPlan {
            cut,
            tail: TailOutcome::Bound(0.0),
        });
    }
    if !lowest_block_is(p, l.declared_limit) {
        return Err(undecidable("lowest explicit block differs from the declared limit"));
    }
    let abs = small_shift(&s)?;
    let base = ProductMeasure::new(p.rule().clone());
    let b0 = base.coverage().0;
    // explicit jumps at base indices b0+1 ..= b0+|s|−1
    let segs = base.segments(&b0, &(&b0 + (abs as i64 - 1)), budget)?;
    let band: f64 = segs
        .windows(2)
        .map(|w| w[0].factor.distance_term(&w[1].factor))
        .sum();
    let s2 = (abs as f64).powi(2);
    Ok(TailPlan {
        cut,
        tail: TailOutcome::Bound(round_up_bound(s2 * (band + l.jump_variation_bound()))),
    })
}

fn same_rule_excursions(
    p: &ProductMeasure,
    q: &ProductMeasure,
    e: &Excursions,
    budget: usize,
) -> Result<TailPlan, MeasureError> {
    let s = relative_shift(p, q);
    let off_p = p.shift_offset().clone();
    let b0 = p.rule().coverage().0.clone();
    if s.is_zero() {
        return Ok(TailPlan {
            cut: p.coverage().0,
            tail: TailOutcome::Bound(0.0),
        });
    }
    let abs = small_shift(&s)?;
    let s_pos = if s.is_positive() { abs as i64 } else { 0 };
    if e.growth == 1 {
        // below c both readings lie in the periodic part
        let period = BigIndex::from(e.excursion_len(0));
        let c = &b0 + s.clone().min(BigIndex::zero());
        let cut = &c + &off_p;
        let per_period = distance_over(p, q, &(&cut - &period), &(&cut - 1), budget)?;
        let tail = if per_period > 0.0 {
            TailOutcome::Diverges(DivergenceWitness::Periodic {
                below: cut.clone(),
                period,
                per_period,
            })
        } else {
            TailOutcome::Bound(0.0)
        };
        return Ok(TailPlan { cut, tail });
    }
    if e.ramp_base == 0 {
        return Ok(TailPlan {
            cut: p.coverage().0.min(q.coverage().0),
            tail: TailOutcome::Diverges(DivergenceWitness::Recurring {
                description: "every excursion jumps between the two factors without a ramp".into(),
                per_term: e.low.distance_term(&e.high),
            }),
        });
    }
    // smallest J ≥ 2 with E_{J−1} > |s|, then deepen while the sweep stays cheap
    let g = e.growth as f64;
    let mut j = 2u32;
    while e.excursion_len(j - 1) <= num_bigint::BigInt::from(abs) {
        j += 1;
    }
    let s2 = (abs as f64).powi(2);
    let cost = |j: u32| 2.0 * (e.ramp_base as f64 + 2.0) * g.powi(j as i32);
    while s2 * e.variation_bound_from(j - 1) > 1e-12 && cost(j + 1) <= EXCURSION_SWEEP_TARGET {
        j += 1;
    }
    let depth = BigIndex::from(e.excursion_start(j));
    let cut = &b0 - &depth + s_pos + &off_p;
    Ok(TailPlan {
        cut,
        tail: TailOutcome::Bound(round_up_bound(s2 * e.variation_bound_from(j - 1))),
    })
}

enum Certified {
    Diverges(DivergenceWitness),
    Explicit {
        lo: BigIndex,
        hi: BigIndex,
        tail_bound: f64,
    },
}

fn certify(p: &ProductMeasure, q: &ProductMeasure, budget: usize) -> Result<Certified, MeasureError> {
    let top = p.coverage().1.max(q.coverage().1);
    let pos = p.rule().pos_tail().distance_term(&q.rule().pos_tail());
    if pos > 0.0 {
        return Ok(Certified::Diverges(DivergenceWitness::PositiveTail {
            from: top + 1,
            per_term: pos,
        }));
    }
    let plan = plan_tail(p, q, budget)?;
    match plan.tail {
        TailOutcome::Diverges(w) => Ok(Certified::Diverges(w)),
        TailOutcome::Bound(b) => Ok(Certified::Explicit {
            lo: plan.cut,
            hi: top,
            tail_bound: b,
        }),
    }
}

/// `d(P, Q)` with a certificate: either an enclosure `[value, value + ε]`
/// or a witness of divergence.
pub fn kakutani_distance_exact(p: &ProductMeasure, q: &ProductMeasure) -> Result<ExactDistance, MeasureError> {
    kakutani_distance_exact_with(p, q, DEFAULT_SEGMENT_BUDGET)
}

pub fn kakutani_distance_exact_with(
    p: &ProductMeasure,
    q: &ProductMeasure,
    budget: usize,
) -> Result<ExactDistance, MeasureError> {
    Ok(match certify(p, q, budget)? {
        Certified::Diverges(witness) => ExactDistance::Diverges { witness },
        Certified::Explicit { lo, hi, tail_bound } => ExactDistance::Finite {
            value: distance_over(p, q, &lo, &hi, budget)?,
            tail_bound,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffinityCertificate {
    Zero { witness: DivergenceWitness },
    /// A coordinate where the two factors are mutually singular.
    SingularCoordinate { at: BigIndex },
    Positive { lower: f64, upper: f64 },
}

/// `ρ(P, Q)` certified from the same tail analysis as the distance.
///
/// Each tail term obeys `d_k ≤ ε`, hence `−ln h_k ≤ d_k/(2 − ε)`.
pub fn hellinger_affinity_exact(
    p: &ProductMeasure,
    q: &ProductMeasure,
) -> Result<AffinityCertificate, MeasureError> {
    match certify(p, q, DEFAULT_SEGMENT_BUDGET)? {
        Certified::Diverges(witness) => Ok(AffinityCertificate::Zero { witness }),
        Certified::Explicit { lo, hi, tail_bound } => {
            for s in paired_segments(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)? {
                if s.p.affinity(&s.q) == 0.0 {
                    return Ok(AffinityCertificate::SingularCoordinate { at: s.lo });
                }
            }
            let l = log_affinity_over(p, q, &lo, &hi, DEFAULT_SEGMENT_BUDGET)?;
            let tail_log = if tail_bound < 2.0 {
                tail_bound / (2.0 - tail_bound)
            } else {
                f64::INFINITY
            };
            Ok(AffinityCertificate::Positive {
                lower: (l - round_up_bound(tail_log)).exp(),
                upper: l.exp(),
            })
        }
    }
}
