/// Usage errors exit with status 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage { flag: &'static str, message: String },
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn usage(flag: &'static str, message: impl Into<String>) -> Self {
        CliError::Usage {
            flag,
            message: message.into(),
        }
    }

    pub fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage { flag, message } => write!(f, "invalid value for '{flag}': {message}"),
            CliError::Domain(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}
