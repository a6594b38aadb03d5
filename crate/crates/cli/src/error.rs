use std::fmt;

/// CLI failure, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, keys, values or files.
    Usage(String),
    /// A computation failed or produced an invalid result.
    Numerical(String),
    /// `validate` found a check outside tolerance.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<coopcell::Error> for CliError {
    fn from(e: coopcell::Error) -> Self {
        use coopcell::Error as E;
        match e {
            E::NoConvergence { .. }
            | E::NonFiniteIntegrand { .. }
            | E::NumericalInstability { .. }
            | E::ZeroCapacity => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}
