use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "nonsing", version, about = "Non-singular Bernoulli shifts: construct, classify, profile")]
pub struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Ceiling (bits) for the exact comparisons of the level construction.
    #[arg(
        long,
        global = true,
        env = "NONSING_PRECISION_BITS",
        default_value_t = 65536,
        value_parser = clap::value_parser!(u64).range(64..)
    )]
    pub precision_bits: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Build the first T levels of the inductive construction.
    Construct(ConstructArgs),
    /// Print a measure as a measure-spec document.
    ShowMeasure(ShowArgs),
    /// Kakutani distance between a measure and a shift of it (or another measure).
    Distance(PairArgs),
    /// Hellinger affinity between a measure and a shift of it (or another measure).
    Affinity(PairArgs),
    /// Decide NotNonsingular / EquivalentInvariant / ZeroType.
    Classify(ClassifyArgs),
    /// Sample windowed Radon–Nikodym derivatives of T^n.
    RnSample(RnArgs),
    /// d(P, P∘T^n) for a range of n.
    ZeroTypeProfile(ProfileArgs),
    /// Partial sums of the product Radon–Nikodym derivative of T^{l_1}×…×T^{l_k}.
    Conservativity(ConservativityArgs),
    /// Renewal sequence diagnostics for a renewal function p.
    Renewal(RenewalArgs),
    /// Divergence of Σ_n Π_j p(n·|t_j|).
    Pwm(PwmArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArg {
    /// Built-in name (fair, perturbed, step, alternating, no-limit, kosloff:T)
    /// or a measure-spec / levels file.
    #[arg(long, value_name = "NAME|PATH")]
    pub measure: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub levels: u32,
    #[arg(long, default_value = "dyadic:2^-t", value_parser = parse_eps)]
    #[serde(serialize_with = "display")]
    pub eps: nonsing_core::construction::EpsilonPolicy,
}

#[derive(Debug, Args, Serialize)]
pub struct ShowArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    /// Also list the factor segments over `lo:hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub window: Option<(i64, i64)>,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    /// Compare against P∘T^n.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true, conflicts_with = "other")]
    pub shift: i64,
    /// Compare against this measure instead of a shift.
    #[arg(long, value_name = "NAME|PATH")]
    pub other: Option<String>,
    /// Also report the truncated value over [−N, N].
    #[arg(long, value_name = "N")]
    pub truncate: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    /// Exit with status 1 unless the shift is certified non-singular.
    #[arg(long)]
    pub require_nonsingular: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[arg(long, allow_hyphen_values = true)]
    pub n: i64,
    /// Coordinates `lo:hi` sampled from P.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub window: (i64, i64),
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    /// `a:b` or a comma-separated list.
    #[arg(long, value_parser = parse_ns, allow_hyphen_values = true)]
    pub n: IntList,
    /// Half-width of the truncated sum used when no certificate exists.
    #[arg(long, default_value_t = 100_000)]
    pub fallback_half_width: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ConservativityArgs {
    #[arg(long, default_value = "kosloff:2", value_name = "NAME|PATH")]
    pub measure: String,
    /// Exponents l_1,…,l_k (nonzero).
    #[arg(long, value_parser = parse_powers, allow_hyphen_values = true)]
    pub powers: IntList,
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenewalCheck {
    NullRecurrence,
    Aperiodicity,
    Interarrival,
    Simulate,
}

#[derive(Debug, Args, Serialize)]
pub struct PArg {
    /// `log`, `geom:q` or `table:PATH` (lines `t,value`).
    #[arg(long, value_name = "FAMILY")]
    pub p: String,
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N")]
    pub big_n: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RenewalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub p: PArg,
    #[arg(long, value_enum, default_value_t = RenewalCheck::NullRecurrence)]
    pub check: RenewalCheck,
    /// Required with `--check simulate`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PwmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub p: PArg,
    /// Times t_1,…,t_k (nonzero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct IntList(pub Vec<i64>);

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn parse_eps(s: &str) -> Result<nonsing_core::construction::EpsilonPolicy, String> {
    s.parse().map_err(|e: nonsing_core::construction::ConstructionError| e.to_string())
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let a: i64 = a.trim().parse().map_err(|_| format!("`{a}` is not an integer"))?;
    let b: i64 = b.trim().parse().map_err(|_| format!("`{b}` is not an integer"))?;
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

fn parse_ns(s: &str) -> Result<IntList, String> {
    parse_list(s).map(IntList)
}

fn parse_list(s: &str) -> Result<Vec<i64>, String> {
    if s.contains(':') {
        let (a, b) = parse_range(s)?;
        if b - a >= 1 << 20 {
            return Err("at most 2^20 values".into());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("`{x}` is not an integer")))
        .collect()
}

fn parse_powers(s: &str) -> Result<IntList, String> {
    let v = parse_list(s)?;
    if v.contains(&0) {
        return Err("exponents must be nonzero".into());
    }
    Ok(IntList(v))
}
