use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const ARTIFACT: &str = "nonsing";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A JSON object carrying the artifact, its version and the run config
/// next to the result fields.
pub fn json_document(run_config: &Value, result: Value) -> Result<String, CliError> {
    let mut doc = Map::new();
    doc.insert("artifact".into(), ARTIFACT.into());
    doc.insert("version".into(), VERSION.into());
    doc.insert("run_config".into(), run_config.clone());
    match result {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc))
        .map_err(|e| CliError::Domain(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

/// CSV with two `#` provenance lines before the header.
pub fn csv_document(run_config: &Value, header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut out = format!("# {ARTIFACT} {VERSION}\n# run_config {run_config}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Domain(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Domain(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
    Ok(out)
}

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
