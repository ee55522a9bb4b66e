//! Parser, printer and checker for a single-clock SystemVerilog assertion
//! subset:
//!
//! ```text
//! [label:] assert property ( @(posedge|negedge clk) [disable iff (expr)]
//!                            expr [|-> | |=> expr] ) [else action] ;
//! ```
//!
//! Sequence operators (`##`, `[*`, `throughout`, ...) are reported as
//! unsupported rather than as syntax errors.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::diag::{DiagnosticKind, ParseDiagnostic};
use crate::lexer::{is_keyword, tokenize, Token, TokenKind};
use crate::ports::{check_brackets, SignalTable};
use crate::value::LogicValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clocking {
    pub edge: Edge,
    pub clock: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Implication {
    /// `|->`
    Overlapped,
    /// `|=>`
    NonOverlapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Not,
    BitNot,
    Neg,
    Plus,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

impl UnaryOp {
    fn from_token(t: &str) -> Option<Self> {
        Some(match t {
            "!" => UnaryOp::Not,
            "~" => UnaryOp::BitNot,
            "-" => UnaryOp::Neg,
            "+" => UnaryOp::Plus,
            "&" => UnaryOp::RedAnd,
            "|" => UnaryOp::RedOr,
            "^" => UnaryOp::RedXor,
            "~&" => UnaryOp::RedNand,
            "~|" => UnaryOp::RedNor,
            "~^" | "^~" => UnaryOp::RedXnor,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
            UnaryOp::RedNand => "~&",
            UnaryOp::RedNor => "~|",
            UnaryOp::RedXnor => "~^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    LogOr,
    LogAnd,
    BitOr,
    BitXor,
    BitXnor,
    BitAnd,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    WildEq,
    WildNe,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
    AShl,
    AShr,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

const BINARY_LEVELS: &[&[(&str, BinaryOp)]] = &[
    &[("||", BinaryOp::LogOr)],
    &[("&&", BinaryOp::LogAnd)],
    &[("|", BinaryOp::BitOr)],
    &[("^", BinaryOp::BitXor), ("~^", BinaryOp::BitXnor), ("^~", BinaryOp::BitXnor)],
    &[("&", BinaryOp::BitAnd)],
    &[
        ("==", BinaryOp::Eq),
        ("!=", BinaryOp::Ne),
        ("===", BinaryOp::CaseEq),
        ("!==", BinaryOp::CaseNe),
        ("==?", BinaryOp::WildEq),
        ("!=?", BinaryOp::WildNe),
    ],
    &[("<", BinaryOp::Lt), ("<=", BinaryOp::Le), (">", BinaryOp::Gt), (">=", BinaryOp::Ge)],
    &[("<<", BinaryOp::Shl), (">>", BinaryOp::Shr), ("<<<", BinaryOp::AShl), (">>>", BinaryOp::AShr)],
    &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
    &[("*", BinaryOp::Mul), ("/", BinaryOp::Div), ("%", BinaryOp::Mod)],
    &[("**", BinaryOp::Pow)],
];

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        BINARY_LEVELS.iter().flat_map(|l| l.iter()).find(|(_, op)| *op == self).map(|(s, _)| *s).unwrap_or("?")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Ident(String),
    /// Numeric literal text as written (`32'hDEADBEEF`, `1'b0`, `3`).
    Literal(String),
    Str(String),
    Member(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Slice(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `base[start +: width]` (`up`) or `base[start -: width]`.
    IndexedSlice {
        base: Box<Expr>,
        start: Box<Expr>,
        up: bool,
        width: Box<Expr>,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Replicate(Box<Expr>, Vec<Expr>),
    /// `$name(args)`; `$name` alone has no args.
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SvaAssertion {
    pub label: Option<String>,
    pub clocking: Clocking,
    pub disable_iff: Option<Expr>,
    pub antecedent: Option<Expr>,
    pub implication: Option<Implication>,
    pub consequent: Expr,
    /// `else $error(...)` action, kept so printing round-trips.
    pub action: Option<Expr>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SvaOptions {
    /// Accept a trailing `endproperty` after each assertion.
    pub lenient: bool,
}

// ---------------------------------------------------------------------------
// printing

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Ident(n) | Expr::Literal(n) => out.push_str(n),
        Expr::Str(s) => out.push_str(s),
        Expr::Member(b, m) => {
            write_expr(out, b);
            out.push('.');
            out.push_str(m);
        }
        Expr::Index(b, i) => {
            write_expr(out, b);
            out.push('[');
            write_expr(out, i);
            out.push(']');
        }
        Expr::Slice(b, m, l) => {
            write_expr(out, b);
            out.push('[');
            write_expr(out, m);
            out.push(':');
            write_expr(out, l);
            out.push(']');
        }
        Expr::IndexedSlice { base, start, up, width } => {
            write_expr(out, base);
            out.push('[');
            write_expr(out, start);
            out.push_str(if *up { " +: " } else { " -: " });
            write_expr(out, width);
            out.push(']');
        }
        Expr::Unary(op, x) => {
            out.push('(');
            out.push_str(op.symbol());
            write_expr(out, x);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            out.push('(');
            write_expr(out, a);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b);
            out.push(')');
        }
        Expr::Ternary(c, a, b) => {
            out.push('(');
            write_expr(out, c);
            out.push_str(" ? ");
            write_expr(out, a);
            out.push_str(" : ");
            write_expr(out, b);
            out.push(')');
        }
        Expr::Concat(items) => {
            out.push('{');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, x);
            }
            out.push('}');
        }
        Expr::Replicate(n, items) => {
            out.push('{');
            write_expr(out, n);
            write_expr(out, &Expr::Concat(items.clone()));
            out.push('}');
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                for (i, x) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_expr(out, x);
                }
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

/// Canonical one-line rendering; every compound expression is parenthesized.
pub fn print_assertion(a: &SvaAssertion) -> String {
    let mut out = String::new();
    if let Some(l) = &a.label {
        let _ = write!(out, "{l}: ");
    }
    let edge = match a.clocking.edge {
        Edge::Pos => "posedge",
        Edge::Neg => "negedge",
    };
    let _ = write!(out, "assert property (@({edge} {}) ", a.clocking.clock);
    if let Some(d) = &a.disable_iff {
        let _ = write!(out, "disable iff ({d}) ");
    }
    if let (Some(ante), Some(imp)) = (&a.antecedent, a.implication) {
        let arrow = match imp {
            Implication::Overlapped => "|->",
            Implication::NonOverlapped => "|=>",
        };
        let _ = write!(out, "{ante} {arrow} ");
    }
    let _ = write!(out, "{})", a.consequent);
    if let Some(act) = &a.action {
        let _ = write!(out, " else {act}");
    }
    out.push(';');
    out
}

impl fmt::Display for SvaAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_assertion(self))
    }
}

// ---------------------------------------------------------------------------
// parsing

/// An identifier reference found while parsing, for the signal cross-check.
#[derive(Debug, Clone)]
struct IdentUse {
    name: String,
    member: Option<String>,
    line: usize,
    column: usize,
}

const UNSUPPORTED_WORDS: &[&str] = &[
    "throughout",
    "within",
    "intersect",
    "until",
    "s_until",
    "until_with",
    "s_until_with",
    "eventually",
    "s_eventually",
    "nexttime",
    "s_nexttime",
    "always",
    "s_always",
    "first_match",
    "strong",
    "weak",
    "implies",
    "accept_on",
    "reject_on",
    "sync_accept_on",
    "sync_reject_on",
    "sequence",
    "inside",
    "dist",
    "matches",
    "expect",
    "restrict",
];

const MAX_DEPTH: usize = 100;

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    depth: usize,
    uses: Vec<IdentUse>,
    eof_line: usize,
    eof_col: usize,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], src: &str) -> Self {
        let eof_line = src.lines().count().max(1);
        let eof_col = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Self { toks, pos: 0, depth: 0, uses: Vec::new(), eof_line, eof_col }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err_here(&self, kind: DiagnosticKind, message: impl FnOnce(&str) -> String) -> ParseDiagnostic {
        match self.peek() {
            Some(t) => ParseDiagnostic::error(kind, t.line, t.column, message(&format!("\"{}\"", t.text))),
            None => ParseDiagnostic::error(kind, self.eof_line, self.eof_col, message("end of input")),
        }
    }

    fn expected(&self, what: &str) -> ParseDiagnostic {
        if let Some(d) = self.unsupported_here() {
            return d;
        }
        self.err_here(DiagnosticKind::Syntax, |at| format!("syntax error at {at}: expected {what}"))
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        if self.eat(text) {
            Ok(())
        } else {
            Err(self.expected(&format!("\"{text}\"")))
        }
    }

    /// Out-of-subset constructs get their own diagnostic kind.
    fn unsupported_here(&self) -> Option<ParseDiagnostic> {
        let t = self.peek()?;
        let why = match t.text.as_str() {
            "##" => "sequence delays",
            "#" if t.kind == TokenKind::Punct => "sequence delays",
            "@" if t.kind == TokenKind::Punct => "multiple clocking events",
            "|->" | "|=>" => "nested implications",
            "->" => "logical implication",
            "[" if self.peek_at(1).is_some_and(|n| n.is("*") || n.is("=") || n.is("->")) => {
                let n = self.peek_at(1).unwrap();
                return Some(ParseDiagnostic::error(
                    DiagnosticKind::Unsupported,
                    t.line,
                    t.column,
                    format!(
                        "unsupported construct \"[{}\": repetition operators are outside the assertion subset",
                        n.text
                    ),
                ));
            }
            w if t.kind == TokenKind::Ident && UNSUPPORTED_WORDS.contains(&w) => "sequence and property operators",
            "and" | "or" | "not" | "if" | "case" if t.kind == TokenKind::Ident => "property operators",
            _ => return None,
        };
        Some(ParseDiagnostic::error(
            DiagnosticKind::Unsupported,
            t.line,
            t.column,
            format!("unsupported construct \"{}\": {why} are outside the assertion subset", t.text),
        ))
    }

    fn assertion(&mut self, opts: SvaOptions) -> PResult<SvaAssertion> {
        let mut label = None;
        if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
            if a.is_ident() && b.is(":") && !is_keyword(&a.text) {
                label = Some(a.text.clone());
                self.pos += 2;
            }
        }
        match self.peek() {
            Some(t) if t.is("assert") => self.pos += 1,
            Some(t) if t.is("assume") || t.is("cover") || t.is("property") || t.is("sequence") => {
                return Err(ParseDiagnostic::error(
                    DiagnosticKind::Unsupported,
                    t.line,
                    t.column,
                    format!("unsupported construct \"{}\": only assert property statements are in the subset", t.text),
                ))
            }
            _ => return Err(self.expected("\"assert\"")),
        }
        self.expect("property")?;
        self.expect("(")?;
        self.expect("@")?;
        self.expect("(")?;
        let edge = if self.eat("posedge") {
            Edge::Pos
        } else if self.eat("negedge") {
            Edge::Neg
        } else {
            return Err(self.expected("\"posedge\" or \"negedge\""));
        };
        let clock = self.ident_use()?;
        self.expect(")")?;
        let mut disable_iff = None;
        if self.at("disable") {
            self.pos += 1;
            self.expect("iff")?;
            self.expect("(")?;
            disable_iff = Some(self.expr()?);
            self.expect(")")?;
        } else if self.peek().is_some_and(|t| t.is_ident()) && self.peek_at(1).is_some_and(|t| t.is("iff")) {
            return Err(self.expected("\"disable\""));
        }
        let first = self.expr()?;
        let (antecedent, implication, consequent) = if self.eat("|->") {
            (Some(first), Some(Implication::Overlapped), self.expr()?)
        } else if self.eat("|=>") {
            (Some(first), Some(Implication::NonOverlapped), self.expr()?)
        } else {
            (None, None, first)
        };
        if !self.at(")") {
            return Err(self.expected("\")\""));
        }
        self.pos += 1;
        let mut action = None;
        if self.eat("else") {
            match self.peek() {
                Some(t) if t.kind == TokenKind::System => action = Some(self.primary()?),
                _ => return Err(self.expected("a system task after \"else\"")),
            }
        }
        self.expect(";")?;
        if opts.lenient {
            self.eat("endproperty");
        }
        Ok(SvaAssertion {
            label,
            clocking: Clocking { edge, clock },
            disable_iff,
            antecedent,
            implication,
            consequent,
            action,
        })
    }

    fn ident_use(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.is_ident() && !is_keyword(&t.text) => {
                self.pos += 1;
                self.uses.push(IdentUse { name: t.text.clone(), member: None, line: t.line, column: t.column });
                Ok(t.text.clone())
            }
            _ => Err(self.expected("a signal name")),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err_here(DiagnosticKind::Syntax, |at| format!("expression nested too deeply at {at}")));
        }
        Ok(())
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.ternary();
        self.depth -= 1;
        r
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_level: usize) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Punct) else {
                break;
            };
            let Some((level, op)) = BINARY_LEVELS
                .iter()
                .enumerate()
                .skip(min_level)
                .find_map(|(l, ops)| ops.iter().find(|(s, _)| *s == t.text).map(|(_, op)| (l, *op)))
            else {
                break;
            };
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if let Some(op) = self.peek().filter(|t| t.kind == TokenKind::Punct).and_then(|t| UnaryOp::from_token(&t.text))
        {
            self.pos += 1;
            self.enter()?;
            let x = self.unary();
            self.depth -= 1;
            return Ok(Expr::Unary(op, Box::new(x?)));
        }
        let mut e = self.primary()?;
        loop {
            if self.at(".") {
                self.pos += 1;
                let Some(m) = self.peek().filter(|t| t.is_ident() && !is_keyword(&t.text)) else {
                    return Err(self.expected("a member name after \".\""));
                };
                self.pos += 1;
                if let Expr::Ident(base) = &e {
                    if let Some(u) = self.uses.iter_mut().rev().find(|u| &u.name == base && u.member.is_none()) {
                        u.member = Some(m.text.clone());
                    }
                }
                e = Expr::Member(Box::new(e), m.text.clone());
            } else if self.at("[") {
                if let Some(d) = self.unsupported_here() {
                    return Err(d);
                }
                self.pos += 1;
                let i = self.expr()?;
                if self.eat(":") {
                    let l = self.expr()?;
                    self.expect("]")?;
                    e = Expr::Slice(Box::new(e), Box::new(i), Box::new(l));
                } else if self.at("+:") || self.at("-:") {
                    let up = self.at("+:");
                    self.pos += 1;
                    let w = self.expr()?;
                    self.expect("]")?;
                    e = Expr::IndexedSlice { base: Box::new(e), start: Box::new(i), up, width: Box::new(w) };
                } else {
                    self.expect("]")?;
                    e = Expr::Index(Box::new(e), Box::new(i));
                }
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        if let Some(d) = self.unsupported_here() {
            return Err(d);
        }
        let Some(t) = self.peek() else {
            return Err(self.expected("an expression"));
        };
        match t.kind {
            TokenKind::Number => {
                if t.text.contains('\'') && !t.text.trim_start_matches('\'').chars().all(|c| "01xXzZ".contains(c)) {
                    if let Err(e) = LogicValue::parse(&t.text) {
                        return Err(ParseDiagnostic::error(
                            DiagnosticKind::Syntax,
                            t.line,
                            t.column,
                            format!("malformed literal \"{}\": {}", t.text, e.reason),
                        ));
                    }
                }
                self.pos += 1;
                Ok(Expr::Literal(t.text.clone()))
            }
            TokenKind::Str => {
                self.pos += 1;
                Ok(Expr::Str(t.text.clone()))
            }
            TokenKind::System => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.eat("(") {
                    if !self.at(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                }
                Ok(Expr::Call(t.text.clone(), args))
            }
            TokenKind::Ident if !is_keyword(&t.text) => self.ident_use().map(Expr::Ident),
            TokenKind::Punct if t.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            TokenKind::Punct if t.text == "{" => {
                self.pos += 1;
                let first = self.expr()?;
                if self.at("{") {
                    self.pos += 1;
                    let mut items = vec![self.expr()?];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect("}")?;
                    self.expect("}")?;
                    return Ok(Expr::Replicate(Box::new(first), items));
                }
                let mut items = vec![first];
                while self.eat(",") {
                    items.push(self.expr()?);
                }
                self.expect("}")?;
                Ok(Expr::Concat(items))
            }
            _ => Err(self.expected("an expression")),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, Vec<ParseDiagnostic>> {
    let toks = tokenize(text).map_err(|d| vec![d])?;
    let unbalanced = check_brackets(&toks);
    if !unbalanced.is_empty() {
        return Err(unbalanced);
    }
    Ok(toks)
}

fn cross_check(uses: &[IdentUse], table: &SignalTable) -> Vec<ParseDiagnostic> {
    let mut diags = Vec::new();
    for u in uses {
        if table.lookup(&u.name).is_none() {
            diags.push(ParseDiagnostic::error(
                DiagnosticKind::UndeclaredSignal,
                u.line,
                u.column,
                format!("undeclared signal \"{}\" in module \"{}\"", u.name, table.module_name),
            ));
            continue;
        }
        if let Some(m) = &u.member {
            let fields = table.fields_of(&u.name).unwrap_or(&[]);
            let unresolved = table.unresolved_widths.iter().any(|n| n == &u.name);
            if fields.is_empty() && !unresolved {
                diags.push(ParseDiagnostic::error(
                    DiagnosticKind::UnknownMember,
                    u.line,
                    u.column,
                    format!("\"{}\" is not a struct, so \"{}.{m}\" does not exist", u.name, u.name),
                ));
            } else if !fields.is_empty() && !fields.iter().any(|f| &f.name == m) {
                diags.push(ParseDiagnostic::error(
                    DiagnosticKind::UnknownMember,
                    u.line,
                    u.column,
                    format!("unknown member \"{m}\" of \"{}\"", u.name),
                ));
            }
        }
    }
    diags
}

/// Parses exactly one assertion, without signal checks.
pub fn parse_sva(text: &str, opts: SvaOptions) -> Result<SvaAssertion, Vec<ParseDiagnostic>> {
    parse_one(text, opts).map(|(a, _)| a)
}

fn parse_one(text: &str, opts: SvaOptions) -> Result<(SvaAssertion, Vec<IdentUse>), Vec<ParseDiagnostic>> {
    let toks = lex(text)?;
    let mut p = Parser::new(&toks, text);
    let a = p.assertion(opts).map_err(|d| vec![d])?;
    if p.peek().is_some() {
        return Err(vec![p.err_here(DiagnosticKind::Syntax, |at| {
            format!("syntax error at {at}: expected end of input after the assertion")
        })]);
    }
    Ok((a, p.uses))
}

/// Parses one assertion and checks every identifier against `table`.
pub fn check_sva(text: &str, table: &SignalTable) -> Result<SvaAssertion, Vec<ParseDiagnostic>> {
    check_sva_with(text, table, SvaOptions::default())
}

pub fn check_sva_with(text: &str, table: &SignalTable, opts: SvaOptions) -> Result<SvaAssertion, Vec<ParseDiagnostic>> {
    let (a, uses) = parse_one(text, opts)?;
    let diags = cross_check(&uses, table);
    if diags.is_empty() {
        Ok(a)
    } else {
        Err(diags)
    }
}

/// Result of checking a file that may hold several assertions.
#[derive(Debug, Clone, Default)]
pub struct SvaFileReport {
    pub assertions: Vec<SvaAssertion>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Parses every assertion in an `.sva` file. After a syntax error the parser
/// resynchronizes at the next `;`. With a table, identifiers are checked too.
pub fn check_sva_file(text: &str, table: Option<&SignalTable>, opts: SvaOptions) -> SvaFileReport {
    let mut report = SvaFileReport::default();
    let toks = match lex(text) {
        Ok(t) => t,
        Err(d) => {
            report.diagnostics = d;
            return report;
        }
    };
    let mut p = Parser::new(&toks, text);
    while p.peek().is_some() {
        let before = p.uses.len();
        match p.assertion(opts) {
            Ok(a) => {
                if let Some(t) = table {
                    report.diagnostics.extend(cross_check(&p.uses[before..], t));
                }
                report.assertions.push(a);
            }
            Err(d) => {
                report.diagnostics.push(d);
                let mut depth = 0i32;
                while let Some(t) = p.peek() {
                    p.pos += 1;
                    match t.text.as_str() {
                        "(" => depth += 1,
                        ")" => depth -= 1,
                        ";" if depth <= 0 => break,
                        _ => {}
                    }
                }
                if opts.lenient {
                    p.eat("endproperty");
                }
            }
        }
    }
    report
}

/// Every identifier (with member, if any) referenced by an assertion.
pub fn referenced_signals(a: &SvaAssertion) -> Vec<String> {
    fn walk(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Ident(n) => out.push(n.clone()),
            Expr::Literal(_) | Expr::Str(_) => {}
            Expr::Member(b, _) | Expr::Unary(_, b) => walk(b, out),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Expr::Slice(a, b, c) | Expr::Ternary(a, b, c) => {
                walk(a, out);
                walk(b, out);
                walk(c, out);
            }
            Expr::IndexedSlice { base, start, width, .. } => {
                walk(base, out);
                walk(start, out);
                walk(width, out);
            }
            Expr::Concat(xs) | Expr::Call(_, xs) => xs.iter().for_each(|x| walk(x, out)),
            Expr::Replicate(n, xs) => {
                walk(n, out);
                xs.iter().for_each(|x| walk(x, out));
            }
        }
    }
    let mut out = vec![a.clocking.clock.clone()];
    for e in [&a.disable_iff, &a.antecedent, &Some(a.consequent.clone()), &a.action].into_iter().flatten() {
        walk(e, &mut out);
    }
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|n| seen.insert(n.clone()));
    out
}
