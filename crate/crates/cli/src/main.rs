mod args;
mod commands;
mod error;
mod load;
mod output;

use clap::Parser;

use args::{Cli, Format};
use error::CliError;

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    let report = commands::run(&cli.command, cli.precision_bits)?;
    let config = serde_json::json!({
        "command": output::to_value(&cli.command),
        "precision_bits": cli.precision_bits,
        "format": cli.format,
        "out": cli.out.as_ref().map(|p| p.display().to_string()),
    });
    let text = match cli.format {
        Format::Json => output::json_document(&config, report.json)?,
        Format::Csv => {
            let table = report
                .csv
                .ok_or_else(|| CliError::usage("--format", "this command has no CSV form"))?;
            output::csv_document(&config, &table.header, table.rows)?
        }
    };
    output::emit(cli.out.as_deref(), &text)?;
    Ok(report.failure)
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(None) => 0,
        Ok(Some(failure)) => {
            eprintln!("error: {failure}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
