use std::fmt;
use std::path::Path;

use timefuse::Error;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments: exit 64.
    Usage(String),
    /// Unreadable or inconsistent input: exit 65.
    Data(String),
    /// Training or inference produced non-finite numbers: exit 70.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
            CliError::Numeric(_) => 70,
        }
    }

    fn map_message(self, f: impl FnOnce(String) -> String) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(f(m)),
            CliError::Data(m) => CliError::Data(f(m)),
            CliError::Numeric(m) => CliError::Numeric(f(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonFiniteLoss { .. } => CliError::Numeric(msg),
            Error::InvalidConfig(_)
            | Error::KOutOfRange { .. }
            | Error::UnknownZooMethod(_)
            | Error::UnknownTask(_)
            | Error::InvalidPeriod { .. }
            | Error::InvalidWidth { .. }
            | Error::InvalidOrder { .. } => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Prefixes errors with the file they concern.
pub trait AtPath<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T, E: Into<CliError>> AtPath<T> for Result<T, E> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| e.into().map_message(|m| format!("{}: {m}", path.display())))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Every input must exist before any work starts.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Usage(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

/// Every output's directory must exist before any work starts.
pub fn require_output_dirs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    for p in paths {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(CliError::Usage(format!(
                    "{}: output directory {} does not exist",
                    p.display(),
                    parent.display()
                )));
            }
        }
        if p.is_dir() {
            return Err(CliError::Usage(format!("{}: output path is a directory", p.display())));
        }
    }
    Ok(())
}
