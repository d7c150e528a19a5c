//! Renewal functions `p(t) = P(X_t = a | X_0 = a)`, their integer samples as
//! renewal sequences, and divergence criteria for the associated flow.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::numeric::NeumaierSum;

/// Absolute slack for negative interarrival masses produced by rounding.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenewalError {
    #[error("renewal sequence is invalid at n = {index}: f_n = {value}")]
    InvalidRenewalSequence { index: usize, value: f64 },
    #[error("u_0 must equal 1, got {0}")]
    NotNormalized(f64),
    #[error("times must be nonzero, got {0}")]
    ZeroTime(f64),
    #[error("at least one time is required")]
    NoTimes,
    #[error("N must be at least 1")]
    EmptyHorizon,
    #[error("interarrival masses sum to {0} > 1")]
    ExcessMass(f64),
    #[error("negative interarrival mass {value} at m = {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("invalid renewal table: {0}")]
    InvalidTable(String),
    #[error("unknown renewal family `{0}` (expected log, geom:q or table:PATH)")]
    UnknownFamily(String),
}

/// What is known about `p(n)` as `n → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailClass {
    /// `p(t) ~ c/(log t)^power`; `Σ_n Π_j p(n t_j)` diverges for every
    /// finite product because `Σ 1/(log n)^k = ∞`.
    LogPower { power: f64 },
    /// `p(t) = q^t` with `q < 1`: every such product is a geometric series.
    Summable,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Log,
    Geometric(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalFunction {
    name: String,
    family: Family,
    tail: TailClass,
}

impl RenewalFunction {
    /// `p(t) = 1/log(e + t)`.
    pub fn log() -> Self {
        Self {
            name: "log".into(),
            family: Family::Log,
            tail: TailClass::LogPower { power: 1.0 },
        }
    }

    /// `p(t) = q^t`.
    pub fn geometric(q: f64) -> Result<Self, RenewalError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(RenewalError::UnknownFamily(format!("geom:{q}")));
        }
        Ok(Self {
            name: format!("geom:{q}"),
            family: Family::Geometric(q),
            tail: TailClass::Summable,
        })
    }

    /// Linear interpolation through `(t, p)` points, constant after the
    /// last one. No tail certificate is available.
    pub fn table(name: &str, mut points: Vec<(f64, f64)>) -> Result<Self, RenewalError> {
        let bad = |m: &str| RenewalError::InvalidTable(m.to_string());
        if points.is_empty() {
            return Err(bad("no points"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points[0] != (0.0, 1.0) {
            return Err(bad("the first point must be (0, 1)"));
        }
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(bad("duplicate time"));
            }
        }
        if points.iter().any(|&(t, p)| !t.is_finite() || !(0.0..=1.0).contains(&p)) {
            return Err(bad("values must lie in [0, 1] at finite times"));
        }
        Ok(Self {
            name: format!("table:{name}"),
            family: Family::Table(points),
            tail: TailClass::Custom,
        })
    }

    /// Parses `t,value` lines; `#` starts a comment.
    pub fn parse_table(name: &str, text: &str) -> Result<Self, RenewalError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parsed = line
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some(p) => points.push(p),
                None => {
                    return Err(RenewalError::InvalidTable(format!(
                        "line {}: expected `t,value`",
                        i + 1
                    )))
                }
            }
        }
        Self::table(name, points)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tail_class(&self) -> TailClass {
        self.tail
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.family {
            Family::Log => 1.0 / (std::f64::consts::E + t).ln(),
            Family::Geometric(q) => q.powf(t),
            Family::Table(pts) => {
                let i = pts.partition_point(|&(x, _)| x <= t);
                if i == pts.len() {
                    return pts[i - 1].1;
                }
                let (t0, p0) = pts[i - 1];
                let (t1, p1) = pts[i];
                p0 + (p1 - p0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn sequence(&self, n: usize) -> RenewalSequence {
        RenewalSequence {
            u: (0..=n).map(|k| self.eval(k as f64)).collect(),
        }
    }
}

impl fmt::Display for RenewalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for RenewalFunction {
    type Err = RenewalError;

    /// `log` or `geom:q`; tables are loaded through [`RenewalFunction::parse_table`].
    fn from_str(s: &str) -> Result<Self, RenewalError> {
        if s == "log" {
            return Ok(Self::log());
        }
        if let Some(q) = s.strip_prefix("geom:") {
            let q = q
                .parse()
                .map_err(|_| RenewalError::UnknownFamily(s.to_string()))?;
            return Self::geometric(q);
        }
        Err(RenewalError::UnknownFamily(s.to_string()))
    }
}

/// `u_0, u_1, …` with `u_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalSequence {
    pub u: Vec<f64>,
}

/// `f_1, f_2, …` stored with an unused `f[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterarrivalDist {
    pub f: Vec<f64>,
}

impl InterarrivalDist {
    pub fn total_mass(&self) -> f64 {
        let mut s = NeumaierSum::new();
        self.f.iter().for_each(|&x| s.add(x));
        s.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aperiodicity {
    Aperiodic { witness: Vec<usize> },
    Period { d: usize },
    Unknown,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `gcd{n ≤ horizon : u_n > 0}` with a witness set whose gcd is 1.
pub fn aperiodicity_check(u: &RenewalSequence, horizon: usize) -> Aperiodicity {
    let mut g = 0;
    let mut witness = Vec::new();
    for n in 1..=horizon.min(u.u.len().saturating_sub(1)) {
        if u.u[n] > 0.0 {
            let h = gcd(g, n);
            if h != g {
                witness.push(n);
                g = h;
            }
            if g == 1 {
                return Aperiodicity::Aperiodic { witness };
            }
        }
    }
    match g {
        0 => Aperiodicity::Unknown,
        d => Aperiodicity::Period { d },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub verdict: Verdict,
    pub n: u64,
    pub partial_sum: f64,
    pub last_term: f64,
    /// `(n, Σ_{m ≤ n})` at powers of ten and at `N`.
    pub checkpoints: Vec<(u64, f64)>,
    /// Terms were nonincreasing over the computed range.
    pub terms_nonincreasing: bool,
}

fn series<F: Fn(u64) -> f64>(big_n: u64, verdict: Verdict, term: F) -> SeriesReport {
    let mut sum = NeumaierSum::new();
    let mut checkpoints = Vec::new();
    let mut next_checkpoint = 10;
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    let mut last = 0.0;
    for n in 1..=big_n {
        let t = term(n);
        monotone &= t <= prev;
        prev = t;
        last = t;
        sum.add(t);
        if n == next_checkpoint || n == big_n {
            checkpoints.push((n, sum.value()));
            if n == next_checkpoint {
                next_checkpoint *= 10;
            }
        }
    }
    SeriesReport {
        verdict,
        n: big_n,
        partial_sum: sum.value(),
        last_term: last,
        checkpoints,
        terms_nonincreasing: monotone,
    }
}

fn verdict_for(tail: TailClass) -> Verdict {
    match tail {
        TailClass::LogPower { .. } => Verdict::Diverges,
        TailClass::Summable => Verdict::Converges,
        TailClass::Custom => Verdict::Inconclusive,
    }
}

/// `Σ_{n ≤ N} p(n)`, with a verdict from the tail class only.
pub fn null_recurrence_verdict(p: &RenewalFunction, big_n: u64) -> Result<SeriesReport, RenewalError> {
    if big_n == 0 {
        return Err(RenewalError::EmptyHorizon);
    }
    Ok(series(big_n, verdict_for(p.tail), |n| p.eval(n as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwmReport {
    /// `|t_j|` as used in the products.
    pub times: Vec<f64>,
    pub series: SeriesReport,
}

/// `Σ_{n ≤ N} Π_j p(n·|t_j|)`.
pub fn pwm_criterion(p: &RenewalFunction, times: &[f64], big_n: u64) -> Result<PwmReport, RenewalError> {
    if times.is_empty() {
        return Err(RenewalError::NoTimes);
    }
    if let Some(&t) = times.iter().find(|t| **t == 0.0 || !t.is_finite()) {
        return Err(RenewalError::ZeroTime(t));
    }
    if big_n == 0 {
        return Err(RenewalError::EmptyHorizon);
    }
    let times: Vec<f64> = times.iter().map(|t| t.abs()).collect();
    let series = series(big_n, verdict_for(p.tail), |n| {
        times.iter().map(|t| p.eval(n as f64 * t)).product()
    });
    Ok(PwmReport { times, series })
}

/// Inverts `u_n = Σ_{m=1}^{n} f_m u_{n−m}`.
pub fn interarrival_from_renewal(u: &RenewalSequence, big_n: usize) -> Result<InterarrivalDist, RenewalError> {
    if u.u.first() != Some(&1.0) {
        return Err(RenewalError::NotNormalized(u.u.first().copied().unwrap_or(f64::NAN)));
    }
    let big_n = big_n.min(u.u.len() - 1);
    let mut f = vec![0.0; big_n + 1];
    for n in 1..=big_n {
        let mut s = NeumaierSum::new();
        s.add(u.u[n]);
        for m in 1..n {
            s.add(-f[m] * u.u[n - m]);
        }
        let v = s.value();
        if v < -NEGATIVITY_TOLERANCE {
            return Err(RenewalError::InvalidRenewalSequence { index: n, value: v });
        }
        f[n] = v;
    }
    Ok(InterarrivalDist { f })
}

/// `u_0 = 1`, `u_n = Σ_{m=1}^{n} f_m u_{n−m}`.
pub fn renewal_from_interarrival(f: &InterarrivalDist, big_n: usize) -> Result<RenewalSequence, RenewalError> {
    if let Some((index, &value)) = f
        .f
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &v)| v < -NEGATIVITY_TOLERANCE)
    {
        return Err(RenewalError::NegativeMass { index, value });
    }
    let mut u = vec![0.0; big_n + 1];
    u[0] = 1.0;
    for n in 1..=big_n {
        let mut s = NeumaierSum::new();
        for m in 1..=n.min(f.f.len().saturating_sub(1)) {
            s.add(f.f[m] * u[n - m]);
        }
        u[n] = s.value();
    }
    Ok(RenewalSequence { u })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalRenewal {
    pub runs: usize,
    /// `û_n` for `n = 0..=horizon`.
    pub u_hat: Vec<f64>,
}

impl EmpiricalRenewal {
    /// `|û_n − u_n| ≤ 4·√(u_n(1 − u_n)/runs)` for every `n ≥ 1`.
    pub fn within_4_sigma(&self, u: &RenewalSequence) -> Vec<usize> {
        (1..self.u_hat.len().min(u.u.len()))
            .filter(|&n| {
                let p = u.u[n];
                let sigma = (p * (1.0 - p) / self.runs as f64).sqrt();
                (self.u_hat[n] - p).abs() > 4.0 * sigma.max(1e-12)
            })
            .collect()
    }
}

/// Simulates renewal epochs with interarrival law `f` up to `horizon`; mass
/// beyond the stored `f` means no further return. Run `i` uses stream `i`
/// of a ChaCha8 generator keyed by `seed`.
pub fn simulate_renewal(
    f: &InterarrivalDist,
    horizon: usize,
    seed: u64,
    runs: usize,
) -> Result<EmpiricalRenewal, RenewalError> {
    let mut cdf = Vec::with_capacity(f.f.len());
    let mut s = NeumaierSum::new();
    for (m, &v) in f.f.iter().enumerate().skip(1) {
        if v < 0.0 {
            return Err(RenewalError::NegativeMass { index: m, value: v });
        }
        s.add(v);
        cdf.push(s.value());
    }
    let total = cdf.last().copied().unwrap_or(0.0);
    if total > 1.0 + NEGATIVITY_TOLERANCE {
        return Err(RenewalError::ExcessMass(total));
    }
    let hits = (0..runs as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; horizon + 1],
            |mut acc, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                acc[0] += 1;
                let mut t = 0usize;
                loop {
                    let x: f64 = rng.gen();
                    if x >= total {
                        break;
                    }
                    // first m with F(m) > x
                    t += cdf.partition_point(|&c| c <= x) + 1;
                    if t > horizon {
                        break;
                    }
                    acc[t] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; horizon + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(EmpiricalRenewal {
        runs,
        u_hat: hits.into_iter().map(|h| h as f64 / runs as f64).collect(),
    })
}
