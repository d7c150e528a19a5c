//! Product measures on `{0,1}^ℤ`, their Hellinger affinities and Kakutani
//! distances, and the classification of the shift.

mod classify;
mod distance;
mod factor;
pub mod fixtures;
mod format;
mod product;
mod rule;

pub use classify::{classify, Classification, ZeroTypeReason};
pub use distance::{
    distance_over, hellinger_affinity, hellinger_affinity_exact, kakutani_distance_exact,
    kakutani_distance_exact_with, kakutani_distance_truncated, log_affinity_over,
    paired_segments, proportionality_check, AffinityCertificate, DivergenceWitness,
    ExactDistance, MeasureError, PairSegment, ProportionalityReport, DEFAULT_SEGMENT_BUDGET,
};
pub use factor::{factor_affinity, factor_distance_term, Factor, FactorError};
pub use format::{
    measure_from_json, measure_to_json, BlockSpec, FormatError, MeasureSpec, TailSpec,
};
pub use product::{factor_at, ProductMeasure};
pub use rule::{
    Block, BlockRule, Excursions, LevelTail, RuleError, Segment, SegmentBudgetExceeded,
    TailDescriptor,
};
