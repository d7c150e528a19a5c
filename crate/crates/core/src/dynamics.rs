//! Radon–Nikodym derivatives of the shift on sampled windows, Monte-Carlo
//! checks, zero-type profiles and conservativity sums for product powers.
//!
//! For a configuration `w` the windowed derivative is
//! `(T^n)'(w) = Π_{k ∈ window} P_{k−n}(w_k) / P_k(w_k)`, carried as a
//! natural logarithm throughout.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::LevelParams;
use crate::index::BigIndex;
use crate::measure::{
    kakutani_distance_exact, kakutani_distance_truncated, log_affinity_over, paired_segments,
    distance_over, ExactDistance, MeasureError, ProductMeasure, TailDescriptor,
    DEFAULT_SEGMENT_BUDGET,
};
use crate::numeric::{ExactSum, NeumaierSum};

/// Largest number of coordinates a single sampled window may hold.
pub const MAX_WINDOW: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("window [{lo}, {hi}] exceeds the budget of {max} coordinates")]
    WindowTooLarge { lo: BigIndex, hi: BigIndex, max: u64 },
    #[error("empty window [{0}, {1}]")]
    EmptyWindow(i64, i64),
    #[error("observed symbol {bit} at coordinate {at} has probability zero")]
    ZeroDensity { at: i64, bit: u8 },
    #[error("power exponents must be nonzero and nonempty")]
    InvalidPowerSpec,
    #[error("expected {expected} sample paths, got {got}")]
    PathCount { expected: usize, got: usize },
    #[error("count must be at least 1")]
    ZeroCount,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A finite window of coordinates, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: &BigIndex, hi: &BigIndex) -> Result<Self, DynamicsError> {
        let too_large = || DynamicsError::WindowTooLarge {
            lo: lo.clone(),
            hi: hi.clone(),
            max: MAX_WINDOW,
        };
        let (a, b) = (lo.to_i64().ok_or_else(too_large)?, hi.to_i64().ok_or_else(too_large)?);
        if a > b {
            return Err(DynamicsError::EmptyWindow(a, b));
        }
        if (b as i128 - a as i128 + 1) as u128 > MAX_WINDOW as u128 {
            return Err(too_large());
        }
        Ok(Self { lo: a, hi: b })
    }

    pub fn from_i64(lo: i64, hi: i64) -> Result<Self, DynamicsError> {
        Self::new(&lo.into(), &hi.into())
    }

    /// Windows are never empty.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    fn bounds(&self) -> (BigIndex, BigIndex) {
        (self.lo.into(), self.hi.into())
    }
}

/// Symbols of one configuration on a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SamplePath {
    pub window: Window,
    pub symbols: Vec<u8>,
    pub seed: u64,
    pub index: u64,
}

impl SamplePath {
    pub fn from_symbols(lo: i64, symbols: Vec<u8>) -> Result<Self, DynamicsError> {
        if symbols.is_empty() {
            return Err(DynamicsError::EmptyWindow(lo, lo - 1));
        }
        let window = Window::from_i64(lo, lo + symbols.len() as i64 - 1)?;
        Ok(Self {
            window,
            symbols,
            seed: 0,
            index: 0,
        })
    }

    pub fn symbol(&self, k: i64) -> Option<u8> {
        if k < self.window.lo || k > self.window.hi {
            return None;
        }
        Some(self.symbols[(k - self.window.lo) as usize])
    }

    /// `T^m w` with `(T^m w)_k = w_{k+m}`: the same symbols on the window
    /// moved down by `m`.
    pub fn shifted(&self, m: i64) -> Self {
        Self {
            window: Window {
                lo: self.window.lo - m,
                hi: self.window.hi - m,
            },
            ..self.clone()
        }
    }

    fn count_ones(&self, lo: i64, hi: i64) -> u64 {
        let a = (lo - self.window.lo) as usize;
        let b = (hi - self.window.lo) as usize;
        self.symbols[a..=b].iter().map(|&s| s as u64).sum()
    }
}

fn draw(p: &ProductMeasure, w: Window, seed: u64, index: u64) -> Result<SamplePath, DynamicsError> {
    let (lo, hi) = w.bounds();
    let segs = p
        .segments(&lo, &hi, DEFAULT_SEGMENT_BUDGET)
        .map_err(MeasureError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut symbols = Vec::with_capacity(w.len());
    for s in segs {
        let n = (&s.hi - &s.lo + 1).to_u64().expect("window fits");
        let p0 = s.factor.p0();
        for _ in 0..n {
            let u: f64 = rng.gen();
            symbols.push(u8::from(u >= p0));
        }
    }
    Ok(SamplePath {
        window: w,
        symbols,
        seed,
        index,
    })
}

/// `count` independent draws from `P` restricted to the window. Path `i`
/// uses stream `i` of a ChaCha8 generator keyed by `seed`.
pub fn sample_paths(
    p: &ProductMeasure,
    window: Window,
    seed: u64,
    count: usize,
) -> Result<Vec<SamplePath>, DynamicsError> {
    if count == 0 {
        return Err(DynamicsError::ZeroCount);
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| draw(p, window, seed, i))
        .collect()
}

/// `ln (T^n)'(w)` over `w`'s window.
pub fn rn_derivative_windowed(p: &ProductMeasure, n: i64, w: &SamplePath) -> Result<f64, DynamicsError> {
    if n == 0 {
        return Ok(0.0);
    }
    let q = p.shift_by(n);
    let (lo, hi) = w.window.bounds();
    let mut sum = NeumaierSum::new();
    for s in paired_segments(&q, p, &lo, &hi, DEFAULT_SEGMENT_BUDGET).map_err(MeasureError::from)? {
        if s.p == s.q {
            continue;
        }
        let (a, b) = (s.lo.to_i64().unwrap(), s.hi.to_i64().unwrap());
        let ones = w.count_ones(a, b);
        let zeros = (b - a + 1) as u64 - ones;
        for (bit, count) in [(0u8, zeros), (1u8, ones)] {
            if count == 0 {
                continue;
            }
            let (num, den) = (s.p.prob(bit == 1), s.q.prob(bit == 1));
            if den == 0.0 {
                let at = (a..=b).find(|&k| w.symbol(k) == Some(bit)).unwrap();
                return Err(DynamicsError::ZeroDensity { at, bit });
            }
            if num == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            sum.add(count as f64 * (num.ln() - den.ln()));
        }
    }
    Ok(sum.value())
}

/// `Σ_{k ∉ window} d(P_k, P_{k−n})` when certifiable: an upper bound on the
/// squared-Hellinger mass the window leaves out.
pub fn outside_window_mass(p: &ProductMeasure, n: i64, w: Window) -> Option<f64> {
    let q = p.shift_by(n);
    match kakutani_distance_exact(p, &q).ok()? {
        ExactDistance::Finite { value, tail_bound } => {
            let (lo, hi) = w.bounds();
            let inside = distance_over(p, &q, &lo, &hi, DEFAULT_SEGMENT_BUDGET).ok()?;
            Some((value + tail_bound - inside).max(0.0))
        }
        ExactDistance::Diverges { .. } => Some(f64::INFINITY),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl MonteCarlo {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mut s = NeumaierSum::new();
        values.iter().for_each(|&v| s.add(v));
        let mean = s.value() / n;
        let mut ss = NeumaierSum::new();
        values.iter().for_each(|&v| ss.add((v - mean) * (v - mean)));
        let var = if values.len() > 1 { ss.value() / (n - 1.0) } else { 0.0 };
        Self {
            mean,
            std_err: (var / n).sqrt(),
            samples: values.len(),
        }
    }

    /// `|mean − target| ≤ 4σ`; a zero-variance sample must hit the target.
    pub fn within_4_sigma(&self, target: f64) -> bool {
        let gap = (self.mean - target).abs();
        if self.std_err == 0.0 {
            gap <= 1e-12 * target.abs().max(1.0)
        } else {
            gap <= 4.0 * self.std_err
        }
    }
}

fn sampled_values<F>(
    p: &ProductMeasure,
    window: Window,
    seed: u64,
    count: usize,
    f: F,
) -> Result<Vec<f64>, DynamicsError>
where
    F: Fn(&SamplePath) -> Result<f64, DynamicsError> + Sync,
{
    if count == 0 {
        return Err(DynamicsError::ZeroCount);
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| draw(p, window, seed, i).and_then(|w| f(&w)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRnReport {
    pub n: i64,
    pub window: Window,
    /// `Π_k Σ_b P_{k−n}(b)` over the window, which is 1 for valid factors.
    pub factorized: f64,
    pub monte_carlo: MonteCarlo,
    pub within_4_sigma: bool,
    pub outside_window_mass: Option<f64>,
}

/// `E_P[(T^n)'_window] = 1`, by factorization and by sampling.
pub fn mean_rn_check(
    p: &ProductMeasure,
    n: i64,
    window: Window,
    seed: u64,
    count: usize,
) -> Result<MeanRnReport, DynamicsError> {
    let (lo, hi) = window.bounds();
    let q = p.shift_by(n);
    let mut log = ExactSum::new();
    for s in q.segments(&lo, &hi, DEFAULT_SEGMENT_BUDGET).map_err(MeasureError::from)? {
        let total = s.factor.p0() + s.factor.p1();
        log.add_times(total.ln(), &s.len().to_bigint().unwrap_or_else(BigInt::one));
    }
    let values = sampled_values(p, window, seed, count, |w| {
        rn_derivative_windowed(p, n, w).map(f64::exp)
    })?;
    let mc = MonteCarlo::from_values(&values);
    Ok(MeanRnReport {
        n,
        window,
        factorized: log.value().exp(),
        within_4_sigma: mc.within_4_sigma(1.0),
        monte_carlo: mc,
        outside_window_mass: outside_window_mass(p, n, window),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqrtRnReport {
    pub n: i64,
    pub window: Window,
    /// `Π_{k ∈ window} h(P_k, P_{k−n})`.
    pub target: f64,
    pub monte_carlo: MonteCarlo,
    pub within_4_sigma: bool,
}

/// Monte-Carlo estimate of `E_P[√(T^n)']`, the windowed affinity `ρ(P, P∘T^n)`.
pub fn sqrt_rn_estimator(
    p: &ProductMeasure,
    n: i64,
    window: Window,
    seed: u64,
    count: usize,
) -> Result<SqrtRnReport, DynamicsError> {
    let (lo, hi) = window.bounds();
    let target = log_affinity_over(p, &p.shift_by(n), &lo, &hi, DEFAULT_SEGMENT_BUDGET)?.exp();
    let values = sampled_values(p, window, seed, count, |w| {
        rn_derivative_windowed(p, n, w).map(|l| (l / 2.0).exp())
    })?;
    let mc = MonteCarlo::from_values(&values);
    Ok(SqrtRnReport {
        n,
        window,
        target,
        within_4_sigma: mc.within_4_sigma(target),
        monte_carlo: mc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Certified enclosure `[distance, distance + tail_bound]`.
    Exact,
    /// Certified infinite.
    Diverges,
    /// Partial sum `d_N` at the fallback window: a lower bound only.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub n: i64,
    pub distance: f64,
    pub tail_bound: f64,
    pub kind: DistanceKind,
    /// `ρ(P, P∘T^n) ≤ exp(−d/2)`.
    pub rho_upper: f64,
}

/// `d(P, P∘T^n)` for each `n`, certified where possible.
pub fn zero_type_profile(
    p: &ProductMeasure,
    ns: &[i64],
    fallback_half_width: &BigIndex,
) -> Result<Vec<ProfileRow>, DynamicsError> {
    ns.par_iter()
        .map(|&n| {
            let q = p.shift_by(n);
            let (distance, tail_bound, kind) = match kakutani_distance_exact(p, &q) {
                Ok(ExactDistance::Finite { value, tail_bound }) => (value, tail_bound, DistanceKind::Exact),
                Ok(ExactDistance::Diverges { .. }) => (f64::INFINITY, 0.0, DistanceKind::Diverges),
                Err(MeasureError::Undecidable(_)) => (
                    kakutani_distance_truncated(p, &q, fallback_half_width)?,
                    f64::INFINITY,
                    DistanceKind::Truncated,
                ),
                Err(e) => return Err(e.into()),
            };
            Ok(ProfileRow {
                n,
                distance,
                tail_bound,
                kind,
                rho_upper: (-distance / 2.0).exp(),
            })
        })
        .collect()
}

/// Exponents `l_1, …, l_k` of `T^{l_1} × ⋯ × T^{l_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PowerSpec {
    exponents: Vec<i64>,
}

impl PowerSpec {
    pub fn new(exponents: Vec<i64>) -> Result<Self, DynamicsError> {
        if exponents.is_empty() || exponents.contains(&0) {
            return Err(DynamicsError::InvalidPowerSpec);
        }
        Ok(Self { exponents })
    }

    pub fn exponents(&self) -> &[i64] {
        &self.exponents
    }

    pub fn k(&self) -> usize {
        self.exponents.len()
    }

    pub fn max_abs(&self) -> u64 {
        self.exponents.iter().map(|l| l.unsigned_abs()).max().unwrap()
    }
}

/// `ln S^{n'}(w⃗) = Σ_i ln T^{(l_i n)'}(w_i)`.
pub fn power_rn(
    p: &ProductMeasure,
    spec: &PowerSpec,
    n: i64,
    paths: &[SamplePath],
) -> Result<f64, DynamicsError> {
    if paths.len() != spec.k() {
        return Err(DynamicsError::PathCount {
            expected: spec.k(),
            got: paths.len(),
        });
    }
    let mut sum = NeumaierSum::new();
    for (l, w) in spec.exponents.iter().zip(paths) {
        sum.add(rn_derivative_windowed(p, l * n, w)?);
    }
    Ok(sum.value())
}

/// `(m_t/L − N_t)·2^{−k·N_t−1}` for one construction level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelBound {
    pub t: u32,
    pub k: usize,
    #[serde(rename = "L")]
    pub l: u64,
    /// Base-2 logarithm of the bound (`−∞` if it is not positive).
    pub log2_bound: f64,
    /// Exact comparison `bound ≥ 1/2`.
    pub at_least_half: bool,
}

/// Exact evaluation of the proof's lower bound for levels `levels`, `k`
/// factors and maximal exponent `L`.
///
/// `(m/L − N)·2^{−kN−1} ≥ 1/2  ⇔  m − L·N ≥ L·2^{kN}`.
pub fn level_bound(level: &LevelParams, k: usize, l: u64) -> LevelBound {
    let big_l = BigIndex::from(l);
    let num = &level.m - &(&big_l * &level.big_n);
    let kn = &level.big_n * &BigIndex::from(k as u64);
    let rhs = kn.to_biguint().map(|e| &big_l * &BigIndex::pow2(e));
    let at_least_half = match rhs {
        Some(r) => num >= r,
        None => false,
    };
    let log2_bound = if num.is_positive() {
        log2_big(&num) - (l as f64).log2() - kn.to_f64() - 1.0
    } else {
        f64::NEG_INFINITY
    };
    LevelBound {
        t: level.t,
        k,
        l,
        log2_bound,
        at_least_half,
    }
}

fn log2_big(x: &BigIndex) -> f64 {
    let Some(b) = x.bits().to_u64() else {
        return f64::INFINITY;
    };
    if b <= 1000 {
        return x.to_f64().log2();
    }
    match x.to_bigint() {
        Some(v) => (v >> (b - 60)).to_f64().unwrap_or(0.0).log2() + (b - 60) as f64,
        // x ≥ 2^{b−1}
        None => (b - 1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseCheck {
    pub t: u32,
    /// Pairs `(n, i)` examined with `n ∈ [N_t, min(m_t/L, N)]`.
    pub checked: u64,
    /// `(n, i)` where `T^{(l_i n)'}(w_i) < 2^{−N_t−1/k}`.
    pub violations: Vec<(i64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativityReport {
    pub exponents: Vec<i64>,
    /// `Σ_{n=1}^{j} S^{n'}(w⃗)` for `j = 1..=N`.
    pub partial_sums: Vec<f64>,
    pub level_bounds: Vec<LevelBound>,
    pub pointwise: Vec<PointwiseCheck>,
}

/// Levels recorded in a measure built by the level construction.
pub fn levels_of(p: &ProductMeasure) -> &[LevelParams] {
    match p.rule().neg_tail() {
        TailDescriptor::LevelParameterized(l) => &l.levels,
        _ => &[],
    }
}

/// Partial sums of `S^{n'}` with the per-level bound ledger.
pub fn conservativity_sums(
    p: &ProductMeasure,
    spec: &PowerSpec,
    paths: &[SamplePath],
    big_n: u64,
) -> Result<ConservativityReport, DynamicsError> {
    if paths.len() != spec.k() {
        return Err(DynamicsError::PathCount {
            expected: spec.k(),
            got: paths.len(),
        });
    }
    let logs: Vec<Vec<f64>> = (1..=big_n as i64)
        .into_par_iter()
        .map(|n| {
            spec.exponents
                .iter()
                .zip(paths)
                .map(|(l, w)| rn_derivative_windowed(p, l * n, w))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut running = NeumaierSum::new();
    let partial_sums = logs
        .iter()
        .map(|row| {
            let mut s = NeumaierSum::new();
            row.iter().for_each(|&x| s.add(x));
            running.add(s.value().exp());
            running.value()
        })
        .collect();

    let k = spec.k();
    let l = spec.max_abs();
    let levels = levels_of(p);
    let level_bounds = levels.iter().map(|lv| level_bound(lv, k, l)).collect();
    let threshold = |nt: f64| -(nt + 1.0 / k as f64) * std::f64::consts::LN_2;
    let pointwise = levels
        .iter()
        .filter_map(|lv| {
            let nt = lv.big_n.to_u64()?;
            let upper = lv
                .m
                .to_bigint()
                .map(|m| m / BigInt::from(l))
                .and_then(|m| m.to_u64())
                .unwrap_or(u64::MAX)
                .min(big_n);
            let mut checked = 0;
            let mut violations = Vec::new();
            for n in nt..=upper {
                for (i, &x) in logs[(n - 1) as usize].iter().enumerate() {
                    checked += 1;
                    if x < threshold(nt as f64) {
                        violations.push((n as i64, i));
                    }
                }
            }
            Some(PointwiseCheck {
                t: lv.t,
                checked,
                violations,
            })
        })
        .collect();
    Ok(ConservativityReport {
        exponents: spec.exponents.clone(),
        partial_sums,
        level_bounds,
        pointwise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub n: i64,
    pub median: f64,
    /// Deciles 0.1, …, 0.9.
    pub deciles: Vec<f64>,
}

/// Nearest-rank quantile of sorted data.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Empirical quantiles of `(T^n)'_window` under `P` for each `n`.
pub fn rn_tends_zero_diagnostic(
    p: &ProductMeasure,
    ns: &[i64],
    window: Window,
    seed: u64,
    count: usize,
) -> Result<Vec<QuantileRow>, DynamicsError> {
    let paths = sample_paths(p, window, seed, count)?;
    ns.iter()
        .map(|&n| {
            let mut v: Vec<f64> = paths
                .par_iter()
                .map(|w| rn_derivative_windowed(p, n, w).map(f64::exp))
                .collect::<Result<_, _>>()?;
            v.sort_by(f64::total_cmp);
            Ok(QuantileRow {
                n,
                median: nearest_rank(&v, 0.5),
                deciles: (1..=9).map(|d| nearest_rank(&v, d as f64 / 10.0)).collect(),
            })
        })
        .collect()
}

/// Smallest window holding every block boundary of moderate size, widened
/// by `max_shift` on both sides so that shifted mismatches stay inside.
pub fn covering_window(p: &ProductMeasure, max_shift: u64) -> Result<Window, DynamicsError> {
    const REACH: i64 = 1 << 30;
    let mut lo = 0i64;
    let mut hi = 0i64;
    for b in p.rule().blocks() {
        for e in [b.lo.clone(), &b.hi + 1] {
            let e = &e + p.shift_offset();
            if let Some(v) = e.to_i64().filter(|v| v.abs() <= REACH) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let s = max_shift.min(REACH as u64) as i64;
    Window::from_i64(lo - s - 1, hi + s)
}
