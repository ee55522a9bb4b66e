use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// What went wrong, so callers can tell an out-of-subset construct from a
/// plain mistake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Lexical,
    Syntax,
    Unbalanced,
    Unsupported,
    UndeclaredSignal,
    UnknownMember,
    Structure,
    UnknownPort,
    PortArity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub message: String,
    pub severity: Severity,
    pub kind: DiagnosticKind,
}

impl ParseDiagnostic {
    pub fn error(kind: DiagnosticKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into(), severity: Severity::Error, kind }
    }

    pub fn warning(kind: DiagnosticKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, ..Self::error(kind, line, column, message) }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}

pub fn has_errors(diags: &[ParseDiagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
