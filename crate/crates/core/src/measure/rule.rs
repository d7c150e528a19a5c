use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::factor::Factor;
use crate::construction::{EpsilonPolicy, LevelParams};
use crate::index::BigIndex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("a block rule needs at least one block")]
    Empty,
    #[error("block {0} has lo > hi")]
    Reversed(usize),
    #[error("blocks {0} and {1} are not contiguous")]
    Gap(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub lo: BigIndex,
    pub hi: BigIndex,
    pub factor: Factor,
}

/// A maximal run of coordinates sharing one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: BigIndex,
    pub hi: BigIndex,
    pub factor: Factor,
}

impl Segment {
    pub fn len(&self) -> BigIndex {
        &self.hi - &self.lo + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("window needs more than {0} block segments")]
pub struct SegmentBudgetExceeded(pub usize);

/// Excursions between two factors on the negative half-line.
///
/// Counting depth `d = 0, 1, 2, …` downward from the first uncovered index,
/// excursion `j` has a plateau of `plateau_base·growth^j` coordinates at
/// `low`, a linear ramp of `ramp_base·growth^j` coordinates up to `high`, a
/// plateau at `high` of the same length, and a ramp back. Both factors are
/// therefore attained infinitely often, and with `growth ≥ 2` and
/// `ramp_base ≥ 1` the one-step variation is summable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursions {
    pub low: Factor,
    pub high: Factor,
    pub plateau_base: u64,
    pub ramp_base: u64,
    pub growth: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTail {
    pub declared_limit: Factor,
    pub eps: EpsilonPolicy,
    pub levels: Arc<Vec<LevelParams>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailDescriptor {
    EventuallyConstant(Factor),
    TwoAccumulationPoints(Excursions),
    /// Levels beyond those stored are not materialized; the factor reported
    /// there is the declared limit and the deviation is carried by the
    /// tail majorants.
    LevelParameterized(LevelTail),
}

impl Excursions {
    pub fn gap(&self) -> f64 {
        (self.high.p0() - self.low.p0()).abs()
    }

    /// Smallest probability attained anywhere along the excursions.
    pub fn min_prob(&self) -> f64 {
        self.low
            .p0()
            .min(self.low.p1())
            .min(self.high.p0())
            .min(self.high.p1())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.gap() <= 0.0 {
            return Err("the two accumulation factors coincide".into());
        }
        if self.plateau_base == 0 {
            return Err("plateau length must be positive".into());
        }
        if self.growth == 0 {
            return Err("growth factor must be positive".into());
        }
        Ok(())
    }

    fn sizes(&self, j: &BigInt) -> (BigInt, BigInt) {
        let scale = match j.to_u32() {
            Some(j) => num_traits::pow(BigInt::from(self.growth), j as usize),
            None => BigInt::one(),
        };
        (
            BigInt::from(self.plateau_base) * &scale,
            BigInt::from(self.ramp_base) * scale,
        )
    }

    pub fn excursion_len(&self, j: u32) -> BigInt {
        let (p, r) = self.sizes(&BigInt::from(j));
        2 * (p + r)
    }

    /// Depth at which excursion `j` starts.
    pub fn excursion_start(&self, j: u32) -> BigInt {
        if self.growth == 1 {
            return self.excursion_len(0) * j;
        }
        (0..j).map(|i| self.excursion_len(i)).sum()
    }

    /// Index of the excursion containing depth `d` and the depth it starts at.
    fn locate(&self, d: &BigInt) -> (BigInt, BigInt) {
        if self.growth == 1 {
            let e = self.excursion_len(0);
            let j = d.div_floor(&e);
            let start = &j * &e;
            return (j, start);
        }
        let mut j = 0u32;
        let mut start = BigInt::zero();
        loop {
            let next = &start + self.excursion_len(j);
            if &next > d {
                return (BigInt::from(j), start);
            }
            start = next;
            j += 1;
        }
    }

    fn ramp_factor(&self, from: Factor, to: Factor, i: &BigInt, r: &BigInt) -> Factor {
        let frac = i.to_f64().unwrap_or(0.0) / (r + 1u32).to_f64().unwrap_or(f64::INFINITY);
        Factor::new((from.p0() + (to.p0() - from.p0()) * frac).clamp(0.0, 1.0))
            .expect("clamped into [0, 1]")
    }

    /// Pieces `(depth_lo, depth_hi, factor)` covering `[d_from, d_to]` in
    /// increasing depth.
    fn pieces(
        &self,
        d_from: &BigInt,
        d_to: &BigInt,
        budget: usize,
        out: &mut Vec<(BigInt, BigInt, Factor)>,
    ) -> Result<(), SegmentBudgetExceeded> {
        let (mut j, mut start) = self.locate(d_from);
        let mut cur = d_from.clone();
        while &cur <= d_to {
            let (p, r) = self.sizes(&j);
            let parts = [
                (BigInt::zero(), p.clone(), Some(self.low), None),
                (p.clone(), r.clone(), None, Some((self.low, self.high))),
                (&p + &r, p.clone(), Some(self.high), None),
                (2 * &p + &r, r.clone(), None, Some((self.high, self.low))),
            ];
            for (off, len, plateau, ramp) in parts {
                let a = &start + &off;
                let b: BigInt = &a + &len - 1u32;
                if len.is_zero() || b < cur || &a > d_to {
                    continue;
                }
                let lo = a.clone().max(cur.clone());
                let hi = b.min(d_to.clone());
                if let Some(f) = plateau {
                    push_piece(out, lo.clone(), hi.clone(), f, budget)?;
                } else if let Some((from, to)) = ramp {
                    let mut x = lo.clone();
                    while x <= hi {
                        let i = &x - &a + 1;
                        let f = self.ramp_factor(from, to, &i, &len);
                        push_piece(out, x.clone(), x.clone(), f, budget)?;
                        x += 1;
                    }
                }
                cur = hi + 1;
            }
            start += 2 * (p + r);
            j += 1;
            cur = cur.max(start.clone());
            if &start > d_to {
                break;
            }
        }
        Ok(())
    }

    fn factor_at_depth(&self, d: &BigInt) -> Factor {
        let mut out = Vec::with_capacity(1);
        self.pieces(d, d, 1, &mut out)
            .expect("one depth is one piece");
        out[0].2
    }

    /// `Σ_j ‖v_j − v_{j−1}‖²` over every step from excursion `j0` downward,
    /// with `‖·‖²` the squared Hellinger term. A step of size `δ` in `p0`
    /// contributes at most `δ²/(2μ)`; excursion `j` has `2(R_j + 1)` steps of
    /// size `gap/(R_j + 1)`.
    pub fn variation_bound_from(&self, j0: u32) -> f64 {
        let mu = self.min_prob();
        if self.growth < 2 || self.ramp_base == 0 || mu <= 0.0 {
            return f64::INFINITY;
        }
        let g = self.growth as f64;
        let per = self.gap().powi(2) / (mu * self.ramp_base as f64);
        // Σ_{j ≥ j0} per·g^{−j}
        per * g.powi(-(j0 as i32)) * g / (g - 1.0)
    }

    pub fn swapped(&self) -> Self {
        Self {
            low: self.low.swapped(),
            high: self.high.swapped(),
            ..*self
        }
    }
}

fn push_piece(
    out: &mut Vec<(BigInt, BigInt, Factor)>,
    lo: BigInt,
    hi: BigInt,
    f: Factor,
    budget: usize,
) -> Result<(), SegmentBudgetExceeded> {
    if let Some(last) = out.last_mut() {
        if last.2 == f && last.1 == &lo - 1 {
            last.1 = hi;
            return Ok(());
        }
    }
    if out.len() >= budget {
        return Err(SegmentBudgetExceeded(budget));
    }
    out.push((lo, hi, f));
    Ok(())
}

impl LevelTail {
    pub fn validate(&self) -> Result<(), String> {
        if self.levels.is_empty() {
            return Err("level stream is empty".into());
        }
        let limit = self.declared_limit.p0();
        let mut prev = f64::INFINITY;
        for l in self.levels.iter() {
            let dev = (l.lambda_factor().p0() - limit).abs();
            if dev.is_nan() || dev > prev {
                return Err(format!(
                    "level {} deviates from the declared limit by {dev}, more than level {}",
                    l.t,
                    l.t - 1
                ));
            }
            prev = dev;
        }
        Ok(())
    }
}

impl TailDescriptor {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            TailDescriptor::EventuallyConstant(_) => Ok(()),
            TailDescriptor::TwoAccumulationPoints(e) => e.validate(),
            TailDescriptor::LevelParameterized(l) => l.validate(),
        }
    }

    /// The limit factor at `−∞` when one exists.
    pub fn limit(&self) -> Option<Factor> {
        match self {
            TailDescriptor::EventuallyConstant(f) => Some(*f),
            TailDescriptor::TwoAccumulationPoints(_) => None,
            TailDescriptor::LevelParameterized(l) => Some(l.declared_limit),
        }
    }

    fn factor_at_depth(&self, d: &BigIndex) -> Factor {
        match self {
            TailDescriptor::EventuallyConstant(f) => *f,
            TailDescriptor::LevelParameterized(l) => l.declared_limit,
            TailDescriptor::TwoAccumulationPoints(e) => match d.to_bigint() {
                Some(d) => e.factor_at_depth(&d),
                None => e.low,
            },
        }
    }

    fn pieces(
        &self,
        d_from: &BigIndex,
        d_to: &BigIndex,
        budget: usize,
    ) -> Result<Vec<(BigIndex, BigIndex, Factor)>, SegmentBudgetExceeded> {
        match self {
            TailDescriptor::TwoAccumulationPoints(e) => {
                match (d_from.to_bigint(), d_to.to_bigint()) {
                    (Some(a), Some(b)) => {
                        let mut out = Vec::new();
                        e.pieces(&a, &b, budget, &mut out)?;
                        Ok(out
                            .into_iter()
                            .map(|(a, b, f)| (BigIndex::from(a), BigIndex::from(b), f))
                            .collect())
                    }
                    _ => Err(SegmentBudgetExceeded(budget)),
                }
            }
            other => Ok(vec![(
                d_from.clone(),
                d_to.clone(),
                other.factor_at_depth(d_from),
            )]),
        }
    }

    pub fn swapped(&self) -> Self {
        match self {
            TailDescriptor::EventuallyConstant(f) => TailDescriptor::EventuallyConstant(f.swapped()),
            TailDescriptor::TwoAccumulationPoints(e) => {
                TailDescriptor::TwoAccumulationPoints(e.swapped())
            }
            TailDescriptor::LevelParameterized(l) => {
                TailDescriptor::LevelParameterized(LevelTail {
                    declared_limit: l.declared_limit.swapped(),
                    ..l.clone()
                })
            }
        }
    }
}

/// Piecewise-constant assignment of factors to coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRule {
    blocks: Vec<Block>,
    pos_tail: Factor,
    neg_tail: TailDescriptor,
}

impl BlockRule {
    pub fn new(blocks: Vec<Block>, pos_tail: Factor, neg_tail: TailDescriptor) -> Result<Self, RuleError> {
        if blocks.is_empty() {
            return Err(RuleError::Empty);
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.lo > b.hi {
                return Err(RuleError::Reversed(i));
            }
            if i > 0 && blocks[i - 1].hi.clone() + 1 != b.lo {
                return Err(RuleError::Gap(i - 1, i));
            }
        }
        Ok(Self {
            blocks,
            pos_tail,
            neg_tail,
        })
    }

    pub fn constant(f: Factor) -> Self {
        Self::new(
            vec![Block {
                lo: BigIndex::zero(),
                hi: BigIndex::zero(),
                factor: f,
            }],
            f,
            TailDescriptor::EventuallyConstant(f),
        )
        .expect("single block")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pos_tail(&self) -> Factor {
        self.pos_tail
    }

    pub fn neg_tail(&self) -> &TailDescriptor {
        &self.neg_tail
    }

    pub fn coverage(&self) -> (&BigIndex, &BigIndex) {
        (&self.blocks[0].lo, &self.blocks[self.blocks.len() - 1].hi)
    }

    /// First block whose `hi ≥ k`.
    fn block_index(&self, k: &BigIndex) -> usize {
        self.blocks.partition_point(|b| &b.hi < k)
    }

    pub fn factor_at(&self, k: &BigIndex) -> Factor {
        let (lo, hi) = self.coverage();
        if k > hi {
            return self.pos_tail;
        }
        if k < lo {
            return self.neg_tail.factor_at_depth(&(lo - k - 1));
        }
        self.blocks[self.block_index(k)].factor
    }

    /// Segments covering `[lo, hi]` in increasing order.
    pub fn segments(
        &self,
        lo: &BigIndex,
        hi: &BigIndex,
        budget: usize,
    ) -> Result<Vec<Segment>, SegmentBudgetExceeded> {
        let mut out: Vec<Segment> = Vec::new();
        if lo > hi {
            return Ok(out);
        }
        let push = |out: &mut Vec<Segment>, s: Segment| {
            if out.len() >= budget {
                return Err(SegmentBudgetExceeded(budget));
            }
            out.push(s);
            Ok(())
        };
        let (cov_lo, cov_hi) = self.coverage();
        if lo < cov_lo {
            let top = hi.clone().min(cov_lo - 1);
            let d_from = cov_lo - &top - 1;
            let d_to = cov_lo - lo - 1;
            let pieces = self.neg_tail.pieces(&d_from, &d_to, budget)?;
            for (da, db, f) in pieces.into_iter().rev() {
                push(
                    &mut out,
                    Segment {
                        lo: cov_lo - &db - 1,
                        hi: cov_lo - &da - 1,
                        factor: f,
                    },
                )?;
            }
        }
        if hi >= cov_lo && lo <= cov_hi {
            for b in &self.blocks[self.block_index(lo)..] {
                if &b.lo > hi {
                    break;
                }
                push(
                    &mut out,
                    Segment {
                        lo: b.lo.clone().max(lo.clone()),
                        hi: b.hi.clone().min(hi.clone()),
                        factor: b.factor,
                    },
                )?;
            }
        }
        if hi > cov_hi {
            push(
                &mut out,
                Segment {
                    lo: lo.clone().max(cov_hi + 1),
                    hi: hi.clone(),
                    factor: self.pos_tail,
                },
            )?;
        }
        Ok(out)
    }

    pub fn swapped(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    factor: b.factor.swapped(),
                    ..b.clone()
                })
                .collect(),
            pos_tail: self.pos_tail.swapped(),
            neg_tail: self.neg_tail.swapped(),
        }
    }
}
