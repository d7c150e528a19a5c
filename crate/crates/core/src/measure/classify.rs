use serde::Serialize;

use super::distance::{
    kakutani_distance_exact, kakutani_distance_truncated, DivergenceWitness, ExactDistance,
    MeasureError,
};
use super::factor::Factor;
use super::product::ProductMeasure;
use super::rule::TailDescriptor;
use crate::index::BigIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroTypeReason {
    SingularToLimitProduct,
    NoLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    /// `d(P, P∘T) = ∞`.
    NotNonsingular { witness: DivergenceWitness },
    /// `Q` is the stationary product of the limit factor and `d(P, Q)` is
    /// enclosed in `[distance, distance + tail_bound]`.
    EquivalentInvariant {
        q: ProductMeasure,
        distance: f64,
        tail_bound: f64,
    },
    ZeroType {
        reason: ZeroTypeReason,
        witness: Option<DivergenceWitness>,
    },
    Degenerate { limit: Factor },
    Inconclusive {
        diagnostic: String,
        partial_distance: Option<f64>,
    },
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::NotNonsingular { .. } => "NotNonsingular",
            Classification::EquivalentInvariant { .. } => "EquivalentInvariant",
            Classification::ZeroType {
                reason: ZeroTypeReason::SingularToLimitProduct,
                ..
            } => "ZeroType(SingularToLimitProduct)",
            Classification::ZeroType {
                reason: ZeroTypeReason::NoLimit,
                ..
            } => "ZeroType(NoLimit)",
            Classification::Degenerate { .. } => "Degenerate",
            Classification::Inconclusive { .. } => "Inconclusive",
        }
    }
}

const DIAGNOSTIC_WINDOW: i64 = 1000;

fn inconclusive(p: &ProductMeasure, diagnostic: String) -> Classification {
    let partial =
        kakutani_distance_truncated(p, &p.shift_by(1), &BigIndex::from(DIAGNOSTIC_WINDOW)).ok();
    Classification::Inconclusive {
        diagnostic,
        partial_distance: partial,
    }
}

fn exact_or_inconclusive(
    p: &ProductMeasure,
    q: &ProductMeasure,
) -> Result<ExactDistance, Classification> {
    kakutani_distance_exact(p, q).map_err(|e| match e {
        MeasureError::Undecidable(msg) => inconclusive(p, msg),
        other => inconclusive(p, other.to_string()),
    })
}

/// Splits product measures into the non-singular cases with an equivalent
/// invariant product, zero-type shifts, and the degenerate or singular rest.
pub fn classify(p: &ProductMeasure) -> Classification {
    let tail = p.rule().neg_tail();
    if let Err(e) = tail.validate() {
        return inconclusive(p, format!("invalid tail descriptor: {e}"));
    }
    match exact_or_inconclusive(p, &p.shift_by(1)) {
        Err(c) => return c,
        Ok(ExactDistance::Diverges { witness }) => {
            return Classification::NotNonsingular { witness }
        }
        Ok(ExactDistance::Finite { .. }) => {}
    }
    if let TailDescriptor::TwoAccumulationPoints(_) = tail {
        return Classification::ZeroType {
            reason: ZeroTypeReason::NoLimit,
            witness: None,
        };
    }
    let limit = tail.limit().expect("tails other than excursions have a limit");
    if limit.is_degenerate() {
        return Classification::Degenerate { limit };
    }
    let q = ProductMeasure::constant(limit);
    match exact_or_inconclusive(p, &q) {
        Err(c) => c,
        Ok(ExactDistance::Finite { value, tail_bound }) => Classification::EquivalentInvariant {
            q,
            distance: value,
            tail_bound,
        },
        Ok(ExactDistance::Diverges { witness }) => Classification::ZeroType {
            reason: ZeroTypeReason::SingularToLimitProduct,
            witness: Some(witness),
        },
    }
}
