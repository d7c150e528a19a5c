use std::sync::Arc;

use super::factor::Factor;
use super::rule::{BlockRule, Segment, SegmentBudgetExceeded};
use crate::index::BigIndex;

/// A product measure `⊗_k P_k` on `{0,1}^ℤ`.
///
/// Shifts are recorded in `shift_offset`: the measure `P∘T^n` has
/// `(P∘T^n)_k = P_{k−n}`, so it reads the shared rule at `k − offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    rule: Arc<BlockRule>,
    shift_offset: BigIndex,
}

impl ProductMeasure {
    pub fn new(rule: BlockRule) -> Self {
        Self {
            rule: Arc::new(rule),
            shift_offset: BigIndex::zero(),
        }
    }

    pub fn constant(f: Factor) -> Self {
        Self::new(BlockRule::constant(f))
    }

    pub fn rule(&self) -> &BlockRule {
        &self.rule
    }

    pub fn shift_offset(&self) -> &BigIndex {
        &self.shift_offset
    }

    /// Both measures read the same rule (possibly at different offsets).
    pub fn shares_rule(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.rule, &other.rule) || self.rule == other.rule
    }

    pub fn factor_at(&self, k: &BigIndex) -> Factor {
        self.rule.factor_at(&(k - &self.shift_offset))
    }

    /// `P∘T^n`.
    pub fn shift(&self, n: &BigIndex) -> Self {
        Self {
            rule: Arc::clone(&self.rule),
            shift_offset: &self.shift_offset + n,
        }
    }

    pub fn shift_by(&self, n: i64) -> Self {
        self.shift(&BigIndex::from(n))
    }

    /// Explicitly covered coordinates in absolute position.
    pub fn coverage(&self) -> (BigIndex, BigIndex) {
        let (lo, hi) = self.rule.coverage();
        (lo + &self.shift_offset, hi + &self.shift_offset)
    }

    pub fn segments(
        &self,
        lo: &BigIndex,
        hi: &BigIndex,
        budget: usize,
    ) -> Result<Vec<Segment>, SegmentBudgetExceeded> {
        let off = &self.shift_offset;
        let mut segs = self.rule.segments(&(lo - off), &(hi - off), budget)?;
        if !off.is_zero() {
            for s in &mut segs {
                s.lo = &s.lo + off;
                s.hi = &s.hi + off;
            }
        }
        Ok(segs)
    }

    /// Every factor with its symbols exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            rule: Arc::new(self.rule.swapped()),
            shift_offset: self.shift_offset.clone(),
        }
    }
}

pub fn factor_at(p: &ProductMeasure, k: &BigIndex) -> Factor {
    p.factor_at(k)
}
