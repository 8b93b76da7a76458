//! Exit-code carrying error for the command line.

use cavity_modes::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Configuration problem at a field path such as `stack.n_high`.
    pub fn config(path: impl AsRef<str>, message: impl Into<String>) -> Self {
        let path = path.as_ref();
        let message = message.into();
        CliError {
            code: EXIT_CONFIG,
            message: if path.is_empty() { message } else { format!("{path}: {message}") },
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }

    /// Map a library error raised while computing `context`.
    pub fn from_core(context: &str, err: Error) -> Self {
        let code = match err {
            Error::Numerical { .. } | Error::Fit(_) | Error::DegenerateScale(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        CliError { code, message: format!("{context}: {err}") }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
