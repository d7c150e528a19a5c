//! Measure-spec documents: JSON with every index as a decimal string.
//!
//! ```json
//! {
//!   "blocks": [{"lo": "-1", "hi": "-1", "p0": 0.9}, {"lo": "0", "hi": "0", "p0": 0.5}],
//!   "pos_tail": {"p0": 0.5},
//!   "neg_tail": {"kind": "eventually_constant", "p0": 0.9}
//! }
//! ```
//!
//! Indices too large to write out use the sparse `c*2^e` notation of
//! [`BigIndex`]. Unknown top-level keys are ignored. Loading does not
//! validate the tail; an invalid tail is reported by `classify` as
//! inconclusive.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::factor::Factor;
use super::product::ProductMeasure;
use super::rule::{Block, BlockRule, Excursions, LevelTail, RuleError, TailDescriptor};
use crate::construction::{EpsilonPolicy, LevelParams};
use crate::index::BigIndex;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed measure spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub blocks: Vec<BlockSpec>,
    pub pos_tail: Factor,
    pub neg_tail: TailSpec,
    #[serde(default, skip_serializing_if = "BigIndex::is_zero")]
    pub shift_offset: BigIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub lo: BigIndex,
    pub hi: BigIndex,
    #[serde(flatten)]
    pub factor: Factor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailSpec {
    EventuallyConstant {
        #[serde(flatten)]
        factor: Factor,
    },
    TwoAccumulationPoints {
        low: Factor,
        high: Factor,
        plateau_base: u64,
        ramp_base: u64,
        growth: u64,
    },
    LevelParameterized {
        declared_limit: Factor,
        eps: EpsilonPolicy,
        levels: Vec<LevelParams>,
    },
}

impl MeasureSpec {
    pub fn from_measure(p: &ProductMeasure) -> Self {
        let rule = p.rule();
        let neg_tail = match rule.neg_tail() {
            TailDescriptor::EventuallyConstant(f) => TailSpec::EventuallyConstant { factor: *f },
            TailDescriptor::TwoAccumulationPoints(e) => TailSpec::TwoAccumulationPoints {
                low: e.low,
                high: e.high,
                plateau_base: e.plateau_base,
                ramp_base: e.ramp_base,
                growth: e.growth,
            },
            TailDescriptor::LevelParameterized(l) => TailSpec::LevelParameterized {
                declared_limit: l.declared_limit,
                eps: l.eps,
                levels: l.levels.as_ref().clone(),
            },
        };
        Self {
            blocks: rule
                .blocks()
                .iter()
                .map(|b| BlockSpec {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                    factor: b.factor,
                })
                .collect(),
            pos_tail: rule.pos_tail(),
            neg_tail,
            shift_offset: p.shift_offset().clone(),
        }
    }

    pub fn to_measure(&self) -> Result<ProductMeasure, FormatError> {
        let neg_tail = match &self.neg_tail {
            TailSpec::EventuallyConstant { factor } => TailDescriptor::EventuallyConstant(*factor),
            TailSpec::TwoAccumulationPoints {
                low,
                high,
                plateau_base,
                ramp_base,
                growth,
            } => TailDescriptor::TwoAccumulationPoints(Excursions {
                low: *low,
                high: *high,
                plateau_base: *plateau_base,
                ramp_base: *ramp_base,
                growth: *growth,
            }),
            TailSpec::LevelParameterized {
                declared_limit,
                eps,
                levels,
            } => TailDescriptor::LevelParameterized(LevelTail {
                declared_limit: *declared_limit,
                eps: *eps,
                levels: Arc::new(levels.clone()),
            }),
        };
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block {
                lo: b.lo.clone(),
                hi: b.hi.clone(),
                factor: b.factor,
            })
            .collect();
        let rule = BlockRule::new(blocks, self.pos_tail, neg_tail)?;
        Ok(ProductMeasure::new(rule).shift(&self.shift_offset))
    }
}

pub fn measure_to_json(p: &ProductMeasure) -> String {
    serde_json::to_string_pretty(&MeasureSpec::from_measure(p)).expect("measure specs serialize")
}

pub fn measure_from_json(text: &str) -> Result<ProductMeasure, FormatError> {
    let spec: MeasureSpec = serde_json::from_str(text)?;
    spec.to_measure()
}
