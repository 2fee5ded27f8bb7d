use std::fmt;

use serde_json::json;

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or parameters (exit 1).
    Validation(String),
    /// A computation failed (exit 2).
    Numerical(String),
    /// Stdout was closed early; the reader got what it wanted.
    BrokenPipe,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::BrokenPipe => 0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::BrokenPipe => "broken-pipe",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
            CliError::BrokenPipe => "",
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.message(), "exit_code": self.exit_code() } })
            .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl From<delaytherm::Error> for CliError {
    fn from(e: delaytherm::Error) -> Self {
        use delaytherm::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::OutsideQ { .. }
            | E::Inadmissible(_)
            | E::DegenerateRect(_)
            | E::TraceViolation { .. }
            | E::OutOfRange { .. } => CliError::Validation(e.to_string()),
            E::ContourTooClose { .. }
            | E::Eigensolver { .. }
            | E::NearSingular { .. }
            | E::InsufficientSpan(_)
            | E::NonpositiveEnergy { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if let csv::ErrorKind::Io(io) = e.kind() {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                return CliError::BrokenPipe;
            }
        }
        CliError::Validation(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("json: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let v: CliError = delaytherm::Error::OutsideQ { beta: 0.9, alpha: 0.1 }.into();
        assert_eq!(v.exit_code(), 1);
        let n: CliError = delaytherm::Error::InsufficientSpan("two peaks".into()).into();
        assert_eq!(n.exit_code(), 2);
        assert!(n.to_json().contains("\"kind\":\"numerical\""));
    }
}
