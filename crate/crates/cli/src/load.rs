use std::fs;
use std::path::Path;

use nonsing_core::construction::{measure_from_levels, EpsilonPolicy, LevelParams};
use nonsing_core::measure::fixtures::{builtin, BuiltinError};
use nonsing_core::measure::{MeasureSpec, ProductMeasure};
use nonsing_core::renewal::RenewalFunction;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Deserialize)]
struct LevelsDocument {
    eps: EpsilonPolicy,
    levels: Vec<LevelParams>,
}

/// A built-in name, a measure-spec document, or a levels document written
/// by `construct`.
pub fn measure(flag: &'static str, arg: &str) -> Result<ProductMeasure, CliError> {
    let path = Path::new(arg);
    if !path.exists() {
        return match builtin(arg) {
            Ok(p) => Ok(p),
            Err(BuiltinError::Unknown(_)) if arg.ends_with(".json") => {
                Err(CliError::usage(flag, format!("file `{arg}` does not exist")))
            }
            Err(e @ BuiltinError::Unknown(_)) => Err(CliError::usage(flag, e.to_string())),
            Err(e) => Err(CliError::domain(e)),
        };
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(flag, format!("cannot read `{arg}`: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::domain(format!("{arg}: {e}")))?;
    if value.get("blocks").is_some() {
        let spec = MeasureSpec::deserialize(&value).map_err(|e| CliError::domain(format!("{arg}: {e}")))?;
        return spec.to_measure().map_err(|e| CliError::domain(format!("{arg}: {e}")));
    }
    if value.get("levels").is_some() {
        let doc = LevelsDocument::deserialize(&value).map_err(|e| CliError::domain(format!("{arg}: {e}")))?;
        if doc.levels.is_empty() {
            return Err(CliError::domain(format!("{arg}: no levels")));
        }
        return Ok(measure_from_levels(&doc.levels, &doc.eps));
    }
    Err(CliError::domain(format!(
        "{arg}: neither a measure spec (`blocks`) nor a levels document (`levels`)"
    )))
}

pub fn renewal_function(arg: &str) -> Result<RenewalFunction, CliError> {
    if let Some(path) = arg.strip_prefix("table:") {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage("--p", format!("cannot read `{path}`: {e}")))?;
        return RenewalFunction::parse_table(path, &text).map_err(CliError::domain);
    }
    arg.parse().map_err(|e: nonsing_core::renewal::RenewalError| CliError::usage("--p", e.to_string()))
}
