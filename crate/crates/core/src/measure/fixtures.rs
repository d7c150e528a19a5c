//! Named measures used throughout the tests and the command line.

use super::factor::Factor;
use super::product::ProductMeasure;
use super::rule::{Block, BlockRule, Excursions, TailDescriptor};
use crate::construction::{build_levels, measure_from_levels, ConstructionError, EpsilonPolicy};
use crate::exact::DEFAULT_MAX_PRECISION;
use crate::index::BigIndex;

fn f(p0: f64) -> Factor {
    Factor::new(p0).expect("fixture probabilities are valid")
}

fn block(lo: i64, hi: i64, factor: Factor) -> Block {
    Block {
        lo: BigIndex::from(lo),
        hi: BigIndex::from(hi),
        factor,
    }
}

pub fn fair() -> ProductMeasure {
    ProductMeasure::constant(Factor::FAIR)
}

/// Fair except `P_0 = (p0, 1 − p0)`.
pub fn perturbed(p0: f64) -> ProductMeasure {
    let rule = BlockRule::new(
        vec![block(0, 0, f(p0))],
        Factor::FAIR,
        TailDescriptor::EventuallyConstant(Factor::FAIR),
    )
    .expect("single block");
    ProductMeasure::new(rule)
}

/// `(p0, 1 − p0)` below 0, fair from 0 on.
pub fn step(p0: f64) -> ProductMeasure {
    let rule = BlockRule::new(
        vec![block(-1, -1, f(p0)), block(0, 0, Factor::FAIR)],
        Factor::FAIR,
        TailDescriptor::EventuallyConstant(f(p0)),
    )
    .expect("contiguous blocks");
    ProductMeasure::new(rule)
}

/// `(a, 1−a)` at even negative indices, `(b, 1−b)` at odd ones, fair from 0.
pub fn alternating(a: f64, b: f64) -> ProductMeasure {
    let rule = BlockRule::new(
        vec![block(0, 0, Factor::FAIR)],
        Factor::FAIR,
        // depth 0 is index −1 (odd)
        TailDescriptor::TwoAccumulationPoints(Excursions {
            low: f(b),
            high: f(a),
            plateau_base: 1,
            ramp_base: 0,
            growth: 1,
        }),
    )
    .expect("single block");
    ProductMeasure::new(rule)
}

/// Non-singular measure whose negative tail oscillates between `low` and
/// `high` on blocks that double in length, joined by linear ramps.
pub fn no_limit(low: f64, high: f64) -> ProductMeasure {
    let rule = BlockRule::new(
        vec![block(0, 0, Factor::FAIR)],
        Factor::FAIR,
        TailDescriptor::TwoAccumulationPoints(Excursions {
            low: f(low),
            high: f(high),
            plateau_base: 1,
            ramp_base: 1,
            growth: 2,
        }),
    )
    .expect("single block");
    ProductMeasure::new(rule)
}

/// The level construction with `levels` levels and dyadic `ε_t`.
pub fn kosloff(levels: usize) -> Result<ProductMeasure, ConstructionError> {
    let eps = EpsilonPolicy::DYADIC;
    let built = build_levels(levels, &eps, DEFAULT_MAX_PRECISION)?;
    Ok(measure_from_levels(&built, &eps))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuiltinError {
    #[error("unknown built-in measure `{0}` (expected fair, perturbed, step, alternating, no-limit or kosloff:T)")]
    Unknown(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Resolves the names accepted on the command line.
pub fn builtin(name: &str) -> Result<ProductMeasure, BuiltinError> {
    match name {
        "fair" => Ok(fair()),
        "perturbed" => Ok(perturbed(0.9)),
        "step" => Ok(step(0.9)),
        "alternating" => Ok(alternating(0.3, 0.7)),
        "no-limit" => Ok(no_limit(0.3, 0.7)),
        _ => {
            let t = name
                .strip_prefix("kosloff:")
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|&t| t >= 1)
                .ok_or_else(|| BuiltinError::Unknown(name.to_string()))?;
            Ok(kosloff(t)?)
        }
    }
}
