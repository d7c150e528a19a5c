//! Non-singular Bernoulli shifts on `{0,1}^ℤ`.

pub mod construction;
pub mod dynamics;
pub mod exact;
pub mod index;
pub mod measure;
pub mod numeric;
pub mod renewal;

pub use index::BigIndex;
