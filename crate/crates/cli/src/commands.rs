use nonsing_core::construction::{build_levels, verify_growth, verify_levels};
use nonsing_core::dynamics::{
    conservativity_sums, covering_window, mean_rn_check, rn_derivative_windowed, sample_paths,
    sqrt_rn_estimator, zero_type_profile, PowerSpec, Window,
};
use nonsing_core::measure::{
    classify, hellinger_affinity, hellinger_affinity_exact, kakutani_distance_exact,
    kakutani_distance_truncated, Classification, MeasureError, MeasureSpec, ProductMeasure,
};
use nonsing_core::renewal::{
    aperiodicity_check, interarrival_from_renewal, null_recurrence_verdict, pwm_criterion,
    renewal_from_interarrival, simulate_renewal, SeriesReport,
};
use nonsing_core::BigIndex;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::load;
use crate::output::{num, to_value};

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Report {
    pub json: Value,
    pub csv: Option<Table>,
    /// Written output still ends with exit status 1.
    pub failure: Option<String>,
}

impl Report {
    fn json(json: Value) -> Self {
        Self {
            json,
            csv: None,
            failure: None,
        }
    }

    fn with_csv(json: Value, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Self {
            json,
            csv: Some(Table { header, rows }),
            failure: None,
        }
    }
}

pub fn run(cmd: &Command, precision_bits: u64) -> Result<Report, CliError> {
    match cmd {
        Command::Construct(a) => construct(a, precision_bits),
        Command::ShowMeasure(a) => show_measure(a),
        Command::Distance(a) => distance(a),
        Command::Affinity(a) => affinity(a),
        Command::Classify(a) => classify_cmd(a),
        Command::RnSample(a) => rn_sample(a),
        Command::ZeroTypeProfile(a) => profile(a),
        Command::Conservativity(a) => conservativity(a),
        Command::Renewal(a) => renewal(a),
        Command::Pwm(a) => pwm(a),
    }
}

fn construct(a: &ConstructArgs, precision_bits: u64) -> Result<Report, CliError> {
    let levels = build_levels(a.levels as usize, &a.eps, precision_bits).map_err(CliError::domain)?;
    let checks = verify_levels(&levels, &a.eps, precision_bits).map_err(CliError::domain)?;
    let json = json!({
        "eps": a.eps.to_string(),
        "levels": to_value(&levels),
        "checks": to_value(&checks),
        "growth": to_value(&verify_growth(&levels)),
    });
    let rows = levels
        .iter()
        .map(|l| {
            let v = to_value(&l.lambda);
            vec![
                l.t.to_string(),
                l.k.to_string(),
                v["a"].as_str().unwrap_or_default().to_string(),
                v["b"].as_str().unwrap_or_default().to_string(),
                v["k"].to_string(),
                l.n.to_string(),
                l.big_n.to_string(),
                l.m.to_string(),
                l.big_m.to_string(),
            ]
        })
        .collect();
    let header = vec!["t", "k", "lambda_a", "lambda_b", "lambda_k", "n", "N", "m", "M"];
    Ok(Report::with_csv(json, header, rows))
}

fn show_measure(a: &ShowArgs) -> Result<Report, CliError> {
    let p = load::measure("--measure", &a.measure.measure)?;
    let mut json = to_value(&MeasureSpec::from_measure(&p));
    let mut rows = Vec::new();
    if let Some((lo, hi)) = a.window {
        let segs = p
            .segments(&BigIndex::from(lo), &BigIndex::from(hi), nonsing_core::measure::DEFAULT_SEGMENT_BUDGET)
            .map_err(|e| CliError::domain(MeasureError::from(e)))?;
        let listed: Vec<Value> = segs
            .iter()
            .map(|s| json!({"lo": s.lo, "hi": s.hi, "p0": s.factor.p0(), "p1": s.factor.p1()}))
            .collect();
        json["segments"] = Value::Array(listed);
        rows = segs
            .iter()
            .map(|s| vec![s.lo.to_string(), s.hi.to_string(), num(s.factor.p0()), num(s.factor.p1())])
            .collect();
    } else {
        for b in p.rule().blocks() {
            let lo = &b.lo + p.shift_offset();
            let hi = &b.hi + p.shift_offset();
            rows.push(vec![lo.to_string(), hi.to_string(), num(b.factor.p0()), num(b.factor.p1())]);
        }
    }
    Ok(Report::with_csv(json, vec!["lo", "hi", "p0", "p1"], rows))
}

fn pair(a: &PairArgs) -> Result<(ProductMeasure, ProductMeasure, Value), CliError> {
    let p = load::measure("--measure", &a.measure.measure)?;
    match &a.other {
        Some(o) => Ok((p, load::measure("--other", o)?, json!({"other": o}))),
        None => {
            let q = p.shift_by(a.shift);
            Ok((p, q, json!({"shift": a.shift})))
        }
    }
}

fn undecidable(e: MeasureError) -> Result<Value, CliError> {
    match e {
        MeasureError::Undecidable(reason) => Ok(json!({"kind": "undecidable", "reason": reason})),
        other => Err(CliError::domain(other)),
    }
}

fn distance(a: &PairArgs) -> Result<Report, CliError> {
    let (p, q, against) = pair(a)?;
    let exact = match kakutani_distance_exact(&p, &q) {
        Ok(d) => to_value(&d),
        Err(e) => undecidable(e)?,
    };
    let mut json = json!({"against": against, "exact": exact});
    if let Some(n) = a.truncate {
        let d = kakutani_distance_truncated(&p, &q, &BigIndex::from(n)).map_err(CliError::domain)?;
        json["truncated"] = json!({"N": n, "value": d});
    }
    Ok(Report::json(json))
}

fn affinity(a: &PairArgs) -> Result<Report, CliError> {
    let (p, q, against) = pair(a)?;
    let exact = match hellinger_affinity_exact(&p, &q) {
        Ok(c) => to_value(&c),
        Err(e) => undecidable(e)?,
    };
    let mut json = json!({"against": against, "exact": exact});
    if let Some(n) = a.truncate {
        let rho = hellinger_affinity(&p, &q, &BigIndex::from(n)).map_err(CliError::domain)?;
        json["truncated"] = json!({"N": n, "value": rho});
    }
    Ok(Report::json(json))
}

fn classification_json(c: &Classification) -> Value {
    let details = match c {
        Classification::NotNonsingular { witness } => json!({"witness": witness}),
        Classification::EquivalentInvariant {
            q,
            distance,
            tail_bound,
        } => json!({
            "invariant_measure": to_value(&MeasureSpec::from_measure(q)),
            "distance": distance,
            "tail_bound": tail_bound,
        }),
        Classification::ZeroType { reason, witness } => json!({"reason": reason, "witness": witness}),
        Classification::Degenerate { limit } => json!({"limit": limit}),
        Classification::Inconclusive {
            diagnostic,
            partial_distance,
        } => json!({"diagnostic": diagnostic, "partial_distance": partial_distance}),
    };
    json!({"verdict": c.label(), "details": details})
}

fn classify_cmd(a: &ClassifyArgs) -> Result<Report, CliError> {
    let p = load::measure("--measure", &a.measure.measure)?;
    let c = classify(&p);
    let mut report = Report::json(classification_json(&c));
    if a.require_nonsingular && !matches!(
        c,
        Classification::EquivalentInvariant { .. } | Classification::ZeroType { .. }
    ) {
        report.failure = Some(format!("the shift is not certified non-singular: {}", c.label()));
    }
    Ok(report)
}

fn rn_sample(a: &RnArgs) -> Result<Report, CliError> {
    let p = load::measure("--measure", &a.measure.measure)?;
    let w = Window::from_i64(a.window.0, a.window.1).map_err(|e| CliError::usage("--window", e.to_string()))?;
    let mean = mean_rn_check(&p, a.n, w, a.seed, a.count).map_err(CliError::domain)?;
    let sqrt = sqrt_rn_estimator(&p, a.n, w, a.seed, a.count).map_err(CliError::domain)?;
    let paths = sample_paths(&p, w, a.seed, a.count).map_err(CliError::domain)?;
    let logs: Vec<f64> = paths
        .par_iter()
        .map(|s| rn_derivative_windowed(&p, a.n, s))
        .collect::<Result<_, _>>()
        .map_err(CliError::domain)?;
    let rows = logs
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), a.n.to_string(), num(*l)])
        .collect();
    let json = json!({"mean_rn": to_value(&mean), "sqrt_rn": to_value(&sqrt)});
    Ok(Report::with_csv(json, vec!["sample", "n", "log_rn"], rows))
}

fn profile(a: &ProfileArgs) -> Result<Report, CliError> {
    let p = load::measure("--measure", &a.measure.measure)?;
    let rows = zero_type_profile(&p, &a.n.0, &BigIndex::from(a.fallback_half_width)).map_err(CliError::domain)?;
    let csv = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.distance),
                num(r.tail_bound),
                to_value(&r.kind).as_str().unwrap_or_default().to_string(),
                num(r.rho_upper),
            ]
        })
        .collect();
    Ok(Report::with_csv(
        json!({"rows": to_value(&rows)}),
        vec!["n", "distance", "tail_bound", "kind", "rho_upper"],
        csv,
    ))
}

fn conservativity(a: &ConservativityArgs) -> Result<Report, CliError> {
    let p = load::measure("--measure", &a.measure)?;
    let spec = PowerSpec::new(a.powers.0.clone()).map_err(|e| CliError::usage("--powers", e.to_string()))?;
    let reach = a.big_n.saturating_mul(spec.max_abs());
    let w = covering_window(&p, reach).map_err(CliError::domain)?;
    let paths = sample_paths(&p, w, a.seed, spec.k()).map_err(CliError::domain)?;
    let report = conservativity_sums(&p, &spec, &paths, a.big_n).map_err(CliError::domain)?;
    let rows = report
        .partial_sums
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), num(*s)])
        .collect();
    let json = json!({"window": to_value(&w), "report": to_value(&report)});
    Ok(Report::with_csv(json, vec!["n", "partial_sum"], rows))
}

fn series_rows(s: &SeriesReport) -> Vec<Vec<String>> {
    s.checkpoints
        .iter()
        .map(|(n, v)| vec![n.to_string(), num(*v)])
        .collect()
}

fn horizon(n: u64) -> Result<usize, CliError> {
    usize::try_from(n)
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage("--N", "must be a positive machine-size integer"))
}

fn renewal(a: &RenewalArgs) -> Result<Report, CliError> {
    let p = load::renewal_function(&a.p.p)?;
    let head = json!({"p": p.name(), "tail_class": to_value(&p.tail_class())});
    let mut json = head;
    match a.check {
        RenewalCheck::NullRecurrence => {
            let s = null_recurrence_verdict(&p, a.p.big_n).map_err(CliError::domain)?;
            let rows = series_rows(&s);
            json["null_recurrence"] = to_value(&s);
            Ok(Report::with_csv(json, vec!["n", "partial_sum"], rows))
        }
        RenewalCheck::Aperiodicity => {
            let n = horizon(a.p.big_n)?;
            json["aperiodicity"] = to_value(&aperiodicity_check(&p.sequence(n), n));
            Ok(Report::json(json))
        }
        RenewalCheck::Interarrival => {
            let n = horizon(a.p.big_n)?;
            let u = p.sequence(n);
            let f = interarrival_from_renewal(&u, n).map_err(CliError::domain)?;
            let back = renewal_from_interarrival(&f, n).map_err(CliError::domain)?;
            let err = u.u.iter().zip(&back.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let min_f = f.f[1..].iter().copied().fold(f64::INFINITY, f64::min);
            json["interarrival"] = json!({
                "N": n,
                "f_head": &f.f[1..f.f.len().min(11)],
                "min_f": min_f,
                "total_mass": f.total_mass(),
                "round_trip_max_error": err,
            });
            let rows = (1..=n)
                .map(|i| vec![i.to_string(), num(u.u[i]), num(f.f[i]), num(back.u[i])])
                .collect();
            Ok(Report::with_csv(json, vec!["n", "u", "f", "u_round_trip"], rows))
        }
        RenewalCheck::Simulate => {
            let seed = a
                .seed
                .ok_or_else(|| CliError::usage("--seed", "required with --check simulate"))?;
            let n = horizon(a.p.big_n)?;
            let u = p.sequence(n);
            let f = interarrival_from_renewal(&u, n).map_err(CliError::domain)?;
            let sim = simulate_renewal(&f, n, seed, a.runs).map_err(CliError::domain)?;
            let outside = sim.within_4_sigma(&u);
            json["simulation"] = json!({
                "runs": a.runs,
                "horizon": n,
                "outside_4_sigma": outside,
                "all_within_4_sigma": outside.is_empty(),
            });
            let rows = (0..=n)
                .map(|i| vec![i.to_string(), num(u.u[i]), num(sim.u_hat[i])])
                .collect();
            Ok(Report::with_csv(json, vec!["n", "u", "u_hat"], rows))
        }
    }
}

fn pwm(a: &PwmArgs) -> Result<Report, CliError> {
    let p = load::renewal_function(&a.p.p)?;
    let r = pwm_criterion(&p, &a.times, a.p.big_n).map_err(|e| match e {
        nonsing_core::renewal::RenewalError::ZeroTime(_) | nonsing_core::renewal::RenewalError::NoTimes => {
            CliError::usage("--times", e.to_string())
        }
        other => CliError::domain(other),
    })?;
    let rows = series_rows(&r.series);
    let json = json!({"p": p.name(), "tail_class": to_value(&p.tail_class()), "pwm": to_value(&r)});
    Ok(Report::with_csv(json, vec!["n", "partial_sum"], rows))
}
