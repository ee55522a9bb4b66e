//! Lightweight Verilog/SystemVerilog front end: port and register tables,
//! construct tagging, a single-clock SVA subset and testbench sanity checks.

mod constructs;
mod diag;
mod lexer;
mod ports;
mod sva;
mod tb;
mod value;

pub use constructs::{construct_evidence, identifier_words, scan_constructs, Construct};
pub use diag::{has_errors, DiagnosticKind, ParseDiagnostic, Severity};
pub use lexer::{is_keyword, tokenize, Token, TokenKind, KEYWORDS};
pub use ports::{
    check_brackets, module_spans, parse_modules, parse_ports, Direction, ModuleSpan, Parameter, Port, Register,
    SignalTable, StructField, Symbol,
};
pub use sva::{
    check_sva, check_sva_file, check_sva_with, parse_sva, print_assertion, referenced_signals, BinaryOp, Clocking,
    Edge, Expr, Implication, SvaAssertion, SvaFileReport, SvaOptions, UnaryOp,
};
pub use tb::check_testbench_syntax;
pub use value::{Bit, LogicValue, ValueError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HdlError {
    #[error("{}", render_all(.0))]
    Parse(Vec<ParseDiagnostic>),
}

fn render_all(diags: &[ParseDiagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

impl HdlError {
    pub fn diagnostics(&self) -> &[ParseDiagnostic] {
        match self {
            HdlError::Parse(d) => d,
        }
    }
}
