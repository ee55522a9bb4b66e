//! Module header and declaration extraction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::diag::{DiagnosticKind, ParseDiagnostic};
use crate::lexer::{tokenize, Token, TokenKind};
use crate::value::LogicValue;
use crate::HdlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    fn from_word(w: &str) -> Option<Self> {
        match w {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructField {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<StructField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub width: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<StructField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    /// Literal text as written, whitespace collapsed.
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalTable {
    pub module_name: String,
    pub ports: Vec<Port>,
    pub registers: Vec<Register>,
    pub parameters: Vec<Parameter>,
    /// Signals whose width expression could not be evaluated; recorded as 1 bit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_widths: Vec<String>,
}

/// Resolved view of one declared name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbol<'a> {
    Port(&'a Port),
    Register(&'a Register),
    Parameter(&'a Parameter),
}

impl SignalTable {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol<'_>> {
        self.port(name)
            .map(Symbol::Port)
            .or_else(|| self.register(name).map(Symbol::Register))
            .or_else(|| self.parameter(name).map(Symbol::Parameter))
    }

    /// Port or register (not parameter) with this name.
    pub fn is_signal(&self, name: &str) -> bool {
        self.port(name).is_some() || self.register(name).is_some()
    }

    pub fn width_of(&self, name: &str) -> Option<u32> {
        self.port(name).map(|p| p.width).or_else(|| self.register(name).map(|r| r.width))
    }

    pub fn fields_of(&self, name: &str) -> Option<&[StructField]> {
        self.port(name).map(|p| p.fields.as_slice()).or_else(|| self.register(name).map(|r| r.fields.as_slice()))
    }

    /// Width of `base.field`, when `base` is a packed struct.
    pub fn member_width(&self, base: &str, field: &str) -> Option<u32> {
        self.fields_of(base)?.iter().find(|f| f.name == field).map(|f| f.width)
    }

    /// Port and register names in declaration order.
    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.ports.iter().map(|p| p.name.as_str()).chain(self.registers.iter().map(|r| r.name.as_str()))
    }

    pub fn clock(&self) -> Option<&str> {
        const EXACT: &[&str] = &["clk", "clock", "clk_i", "i_clk", "clk_in", "aclk", "hclk", "pclk"];
        let inputs = || self.ports.iter().filter(|p| p.direction == Direction::Input && p.width == 1);
        inputs()
            .find(|p| EXACT.contains(&p.name.to_ascii_lowercase().as_str()))
            .or_else(|| {
                inputs().find(|p| {
                    let n = p.name.to_ascii_lowercase();
                    n.contains("clk") || n.contains("clock")
                })
            })
            .map(|p| p.name.as_str())
    }

    /// Reset input and whether it is active low.
    pub fn reset(&self) -> Option<(&str, bool)> {
        self.ports
            .iter()
            .filter(|p| p.direction == Direction::Input && p.width == 1)
            .find(|p| {
                let n = p.name.to_ascii_lowercase();
                n.contains("rst") || n.contains("reset")
            })
            .map(|p| {
                let n = p.name.to_ascii_lowercase();
                let low = n.ends_with("_n")
                    || n.ends_with("_ni")
                    || n.ends_with("_b")
                    || n.ends_with("rstn")
                    || n.ends_with("resetn")
                    || n.starts_with("n_")
                    || n.starts_with("nrst");
                (p.name.as_str(), low)
            })
    }

    /// Resolves a parameter (or enum member) to its literal value.
    pub fn parameter_value(&self, name: &str) -> Option<LogicValue> {
        let p = self.parameter(name)?;
        LogicValue::parse(&p.value).ok().or_else(|| {
            let toks = tokenize(&p.value).ok()?;
            let env = self.parameters.iter().filter_map(|q| Some((q.name.clone(), tokenize(&q.value).ok()?))).collect();
            let v = eval_const(&toks, &env, 0)?;
            LogicValue::parse(&v.max(0).to_string()).ok()
        })
    }
}

/// Line range of one `module ... endmodule` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpan {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
}

pub fn module_spans(src: &str) -> Vec<ModuleSpan> {
    let Ok(toks) = tokenize(src) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is("module") {
            let name = toks[i + 1..]
                .iter()
                .find(|t| t.is_ident() && !t.is("automatic") && !t.is("static"))
                .map(|t| t.text.clone())
                .unwrap_or_default();
            let start = toks[i].line;
            let end = toks[i..]
                .iter()
                .find(|t| t.is("endmodule"))
                .map(|t| t.line)
                .unwrap_or_else(|| src.lines().count().max(start));
            out.push(ModuleSpan { name, start_line: start, end_line: end });
        }
        i += 1;
    }
    out
}

/// Reports the first unbalanced `(`, `[` or `{`, naming the token.
pub fn check_brackets(toks: &[Token]) -> Vec<ParseDiagnostic> {
    let mut stack: Vec<&Token> = Vec::new();
    for t in toks {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => stack.push(t),
            ")" | "]" | "}" => {
                let want = match t.text.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some(open) if open.text == want => {}
                    Some(open) => {
                        return vec![ParseDiagnostic::error(
                            DiagnosticKind::Unbalanced,
                            t.line,
                            t.column,
                            format!(
                                "unbalanced \"{}\": does not close \"{}\" opened at {}:{}",
                                t.text, open.text, open.line, open.column
                            ),
                        )]
                    }
                    None => {
                        return vec![ParseDiagnostic::error(
                            DiagnosticKind::Unbalanced,
                            t.line,
                            t.column,
                            format!("unbalanced \"{}\" has no matching \"{want}\"", t.text),
                        )]
                    }
                }
            }
            _ => {}
        }
    }
    stack
        .last()
        .map(|open| {
            vec![ParseDiagnostic::error(
                DiagnosticKind::Unbalanced,
                open.line,
                open.column,
                format!("unbalanced \"{}\" is never closed", open.text),
            )]
        })
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// constant expressions

type Env = HashMap<String, Vec<Token>>;

const MAX_EVAL_DEPTH: usize = 32;

/// Evaluates an integer constant expression over parameters.
pub(crate) fn eval_const(toks: &[Token], env: &Env, depth: usize) -> Option<i128> {
    if depth > MAX_EVAL_DEPTH || toks.is_empty() {
        return None;
    }
    let mut p = ConstParser { toks, pos: 0, env, depth };
    let v = p.ternary()?;
    (p.pos == toks.len()).then_some(v)
}

struct ConstParser<'a> {
    toks: &'a [Token],
    pos: usize,
    env: &'a Env,
    depth: usize,
}

impl ConstParser<'_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| t.text.as_str())
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek() == Some(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ternary(&mut self) -> Option<i128> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.ternary()?;
            if !self.eat(":") {
                return None;
            }
            let b = self.ternary()?;
            return Some(if c != 0 { a } else { b });
        }
        Some(c)
    }

    fn binary(&mut self, level: usize) -> Option<i128> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["<<", ">>", "<<<", ">>>"],
            &["+", "-"],
            &["*", "/", "%"],
            &["**"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.peek().filter(|op| LEVELS[level].contains(op)).map(str::to_string) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = match op.as_str() {
                "||" => ((lhs != 0) || (rhs != 0)) as i128,
                "&&" => ((lhs != 0) && (rhs != 0)) as i128,
                "|" => lhs | rhs,
                "^" => lhs ^ rhs,
                "&" => lhs & rhs,
                "==" => (lhs == rhs) as i128,
                "!=" => (lhs != rhs) as i128,
                "<" => (lhs < rhs) as i128,
                "<=" => (lhs <= rhs) as i128,
                ">" => (lhs > rhs) as i128,
                ">=" => (lhs >= rhs) as i128,
                "<<" | "<<<" => lhs.checked_shl(u32::try_from(rhs).ok()?)?,
                ">>" | ">>>" => lhs.checked_shr(u32::try_from(rhs).ok()?)?,
                "+" => lhs.checked_add(rhs)?,
                "-" => lhs.checked_sub(rhs)?,
                "*" => lhs.checked_mul(rhs)?,
                "/" => lhs.checked_div(rhs)?,
                "%" => lhs.checked_rem(rhs)?,
                "**" => lhs.checked_pow(u32::try_from(rhs).ok()?)?,
                _ => return None,
            };
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<i128> {
        if self.eat("-") {
            return self.unary()?.checked_neg();
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("!") {
            return Some((self.unary()? == 0) as i128);
        }
        if self.eat("~") {
            return Some(!self.unary()?);
        }
        self.primary()
    }

    fn primary(&mut self) -> Option<i128> {
        let t = self.toks.get(self.pos)?;
        self.pos += 1;
        match t.kind {
            TokenKind::Number => LogicValue::parse(&t.text).ok()?.to_u128().and_then(|v| i128::try_from(v).ok()),
            TokenKind::Ident => {
                let def = self.env.get(&t.text)?;
                eval_const(def, self.env, self.depth + 1)
            }
            TokenKind::System if t.text == "$clog2" => {
                if !self.eat("(") {
                    return None;
                }
                let v = self.ternary()?;
                if !self.eat(")") {
                    return None;
                }
                let mut bits = 0;
                while (1i128 << bits) < v {
                    bits += 1;
                }
                Some(bits)
            }
            TokenKind::Punct if t.text == "(" => {
                let v = self.ternary()?;
                self.eat(")").then_some(v)
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// declarations

#[derive(Debug, Clone, Default)]
struct TypeInfo {
    width: u32,
    fields: Vec<StructField>,
    enum_members: Vec<(String, String)>,
    resolved: bool,
}

struct Ctx {
    types: HashMap<String, TypeInfo>,
    env: Env,
}

fn builtin_width(word: &str) -> Option<u32> {
    Some(match word {
        "wire" | "reg" | "logic" | "bit" | "tri" | "wand" | "wor" | "var" | "uwire" | "tri0" | "tri1" | "supply0"
        | "supply1" => 1,
        "byte" => 8,
        "shortint" => 16,
        "int" | "integer" => 32,
        "longint" | "time" => 64,
        _ => return None,
    })
}

fn split_top(toks: &[Token], sep: &str) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new()];
    let mut depth = 0i32;
    for t in toks {
        if t.kind == TokenKind::Punct {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
            if depth == 0 && t.text == sep {
                out.push(Vec::new());
                continue;
            }
        }
        out.last_mut().unwrap().push(t.clone());
    }
    if out.last().is_some_and(Vec::is_empty) {
        out.pop();
    }
    out
}

/// Canonical text of a token run: a single space only between two word-like
/// tokens, so whitespace and comments never change the result.
fn collapse(toks: &[Token]) -> String {
    let wordy = |t: &Token| matches!(t.kind, TokenKind::Ident | TokenKind::Number | TokenKind::System);
    let mut out = String::new();
    for (i, t) in toks.iter().enumerate() {
        if i > 0 && wordy(&toks[i - 1]) && wordy(t) {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// Parses consecutive `[..]` groups starting at `*i`. Returns the product of
/// their sizes, or `None` if any bound does not evaluate.
fn packed_dims(toks: &[Token], i: &mut usize, env: &Env) -> Option<Option<u32>> {
    let mut total: Option<u32> = None;
    let mut ok = true;
    while toks.get(*i).is_some_and(|t| t.is("[")) {
        let start = *i + 1;
        let mut depth = 0;
        let mut j = *i;
        while j < toks.len() {
            match toks[j].text.as_str() {
                "[" => depth += 1,
                "]" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            j += 1;
        }
        let inner = &toks[start..j.min(toks.len())];
        *i = (j + 1).min(toks.len());
        let parts = split_top(inner, ":");
        let size = match parts.as_slice() {
            [msb, lsb] => match (eval_const(msb, env, 0), eval_const(lsb, env, 0)) {
                (Some(a), Some(b)) => u32::try_from((a - b).abs() + 1).ok(),
                _ => None,
            },
            [n] => eval_const(n, env, 0).and_then(|n| u32::try_from(n).ok()).filter(|n| *n > 0),
            _ => None,
        };
        match size {
            Some(s) => total = Some(total.unwrap_or(1).saturating_mul(s)),
            None => ok = false,
        }
    }
    ok.then_some(total)
}

fn skip_group(toks: &[Token], i: &mut usize) {
    let (open, close) = match toks.get(*i).map(|t| t.text.as_str()) {
        Some("[") => ("[", "]"),
        Some("(") => ("(", ")"),
        Some("{") => ("{", "}"),
        _ => return,
    };
    let mut depth = 0;
    while *i < toks.len() {
        if toks[*i].is(open) {
            depth += 1;
        } else if toks[*i].is(close) {
            depth -= 1;
            if depth == 0 {
                *i += 1;
                return;
            }
        }
        *i += 1;
    }
}

/// The type part of a declaration, after direction/kind keywords.
#[derive(Debug, Clone)]
struct DeclType {
    width: u32,
    fields: Vec<StructField>,
    explicit: bool,
    resolved: bool,
}

impl Ctx {
    /// Reads `[kind] [signed] [typename] [dims]` starting at `*i`.
    fn decl_type(&self, toks: &[Token], i: &mut usize) -> DeclType {
        let mut base = 1;
        let mut explicit = false;
        let mut fields = Vec::new();
        let mut resolved = true;
        while let Some(t) = toks.get(*i) {
            if let Some(w) = builtin_width(&t.text) {
                // `wire logic` style stacking keeps the innermost.
                base = w;
                explicit |= w != 1;
                *i += 1;
            } else if matches!(
                t.text.as_str(),
                "signed" | "unsigned" | "const" | "static" | "automatic" | "interconnect"
            ) {
                *i += 1;
            } else if let Some(ty) = self.types.get(&t.text) {
                base = ty.width;
                fields = ty.fields.clone();
                resolved &= ty.resolved;
                explicit = true;
                *i += 1;
            } else if t.is_ident()
                && toks.get(*i + 1).is_some_and(|n| n.is("::"))
                && toks.get(*i + 2).is_some_and(|n| n.is_ident())
                && toks.get(*i + 3).is_some_and(Token::is_ident)
            {
                // pkg::type_t from a package we have not seen.
                *i += 3;
                resolved = false;
                explicit = true;
            } else {
                break;
            }
        }
        match packed_dims(toks, i, &self.env) {
            Some(Some(n)) => DeclType { width: base.saturating_mul(n), fields, explicit: true, resolved },
            Some(None) => DeclType { width: base, fields, explicit, resolved },
            None => DeclType { width: 1, fields: Vec::new(), explicit: true, resolved: false },
        }
    }

    /// Names declared in a comma-separated list, skipping unpacked dims and
    /// initializers.
    fn decl_names(&self, toks: &[Token], start: usize) -> Vec<String> {
        split_top(&toks[start..], ",")
            .into_iter()
            .filter_map(|item| item.first().filter(|t| t.is_ident()).map(|t| t.text.clone()))
            .collect()
    }

    fn parse_typedef(&mut self, stmt: &[Token]) {
        // typedef <type> name
        let Some(name) = stmt.last().filter(|t| t.is_ident()).map(|t| t.text.clone()) else {
            return;
        };
        let body = &stmt[1..stmt.len() - 1];
        let info = match body.first().map(|t| t.text.as_str()) {
            Some("struct") | Some("union") => {
                let union = body[0].is("union");
                let open = body.iter().position(|t| t.is("{"));
                let close = body.iter().rposition(|t| t.is("}"));
                let (Some(o), Some(c)) = (open, close) else {
                    return;
                };
                let mut fields = Vec::new();
                let mut resolved = true;
                for member in split_top(&body[o + 1..c], ";") {
                    let mut i = 0;
                    let ty = self.decl_type(&member, &mut i);
                    resolved &= ty.resolved;
                    for n in self.decl_names(&member, i) {
                        fields.push(StructField { name: n, width: ty.width });
                    }
                }
                let width = if union {
                    fields.iter().map(|f| f.width).max().unwrap_or(1)
                } else {
                    fields.iter().map(|f| f.width).sum::<u32>().max(1)
                };
                TypeInfo { width, fields, enum_members: Vec::new(), resolved }
            }
            Some("enum") => {
                let open = body.iter().position(|t| t.is("{"));
                let close = body.iter().rposition(|t| t.is("}"));
                let (Some(o), Some(c)) = (open, close) else {
                    return;
                };
                let mut i = 1;
                let ty = if i < o {
                    self.decl_type(&body[..o], &mut i)
                } else {
                    DeclType { width: 32, fields: Vec::new(), explicit: true, resolved: true }
                };
                let mut members = Vec::new();
                let mut next: i128 = 0;
                for item in split_top(&body[o + 1..c], ",") {
                    let Some(n) = item.first().filter(|t| t.is_ident()) else {
                        continue;
                    };
                    let value = match item.iter().position(|t| t.is("=")) {
                        Some(eq) => {
                            let expr = &item[eq + 1..];
                            if let Some(v) = eval_const(expr, &self.env, 0) {
                                next = v;
                            }
                            collapse(expr)
                        }
                        None => format!("{}'d{}", ty.width, next),
                    };
                    next += 1;
                    members.push((n.text.clone(), value));
                }
                TypeInfo { width: ty.width, fields: Vec::new(), enum_members: members, resolved: ty.resolved }
            }
            _ => {
                let mut i = 0;
                let ty = self.decl_type(body, &mut i);
                TypeInfo { width: ty.width, fields: ty.fields, enum_members: Vec::new(), resolved: ty.resolved }
            }
        };
        for (m, v) in &info.enum_members {
            if let Ok(t) = tokenize(v) {
                self.env.insert(m.clone(), t);
            }
        }
        self.types.insert(name, info);
    }

    /// `parameter [type] NAME = expr, NAME = expr`
    fn parse_params(&mut self, toks: &[Token], out: &mut Vec<Parameter>) {
        for item in split_top(toks, ",") {
            let Some(eq) = item.iter().position(|t| t.is("=")) else {
                continue;
            };
            let Some(name) = item[..eq].iter().rev().find(|t| t.is_ident()) else {
                continue;
            };
            if matches!(name.text.as_str(), "parameter" | "localparam") {
                continue;
            }
            let expr = &item[eq + 1..];
            self.env.insert(name.text.clone(), expr.to_vec());
            if !out.iter().any(|p| p.name == name.text) {
                out.push(Parameter { name: name.text.clone(), value: collapse(expr) });
            }
        }
    }
}

struct Builder {
    table: SignalTable,
}

impl Builder {
    fn note_unresolved(&mut self, name: &str) {
        if !self.table.unresolved_widths.iter().any(|n| n == name) {
            self.table.unresolved_widths.push(name.to_string());
        }
    }

    fn add_port(&mut self, name: String, direction: Direction, ty: &DeclType) {
        if !ty.resolved {
            self.note_unresolved(&name);
        }
        if let Some(p) = self.table.ports.iter_mut().find(|p| p.name == name) {
            p.direction = direction;
            if ty.explicit {
                p.width = ty.width;
                p.fields = ty.fields.clone();
            }
            return;
        }
        self.table.ports.push(Port { name, direction, width: ty.width.max(1), fields: ty.fields.clone() });
    }

    fn add_register(&mut self, name: String, ty: &DeclType) {
        if !ty.resolved {
            self.note_unresolved(&name);
        }
        if let Some(p) = self.table.ports.iter_mut().find(|p| p.name == name) {
            if ty.explicit {
                p.width = ty.width.max(1);
                p.fields = ty.fields.clone();
            }
            return;
        }
        if self.table.registers.iter().any(|r| r.name == name) {
            return;
        }
        self.table.registers.push(Register { name, width: ty.width.max(1), fields: ty.fields.clone() });
    }
}

fn parse_error(diags: Vec<ParseDiagnostic>) -> HdlError {
    HdlError::Parse(diags)
}

/// Statements of a token range split on top-level `;`.
fn statements(toks: &[Token]) -> Vec<Vec<Token>> {
    split_top(toks, ";")
}

const BLOCK_NOISE: &[&str] =
    &["begin", "end", "endcase", "endgenerate", "generate", "else", "fork", "join", "join_any", "join_none"];

fn parse_module_at(ctx: &mut Ctx, toks: &[Token], at: usize) -> Result<(SignalTable, usize), HdlError> {
    let mut i = at + 1;
    while toks.get(i).is_some_and(|t| t.is("automatic") || t.is("static")) {
        i += 1;
    }
    let name_tok = toks.get(i).filter(|t| t.is_ident()).ok_or_else(|| {
        let t = &toks[at];
        parse_error(vec![ParseDiagnostic::error(
            DiagnosticKind::Syntax,
            t.line,
            t.column,
            "expected module name after \"module\"",
        )])
    })?;
    let mut b = Builder {
        table: SignalTable {
            module_name: name_tok.text.clone(),
            ports: Vec::new(),
            registers: Vec::new(),
            parameters: Vec::new(),
            unresolved_widths: Vec::new(),
        },
    };
    i += 1;
    let end = toks[i..].iter().position(|t| t.is("endmodule")).map(|p| p + i).ok_or_else(|| {
        parse_error(vec![ParseDiagnostic::error(
            DiagnosticKind::Structure,
            name_tok.line,
            name_tok.column,
            format!("module \"{}\" has no \"endmodule\"", name_tok.text),
        )])
    })?;
    // package imports in the header
    while toks.get(i).is_some_and(|t| t.is("import")) {
        while i < end && !toks[i].is(";") {
            i += 1;
        }
        i += 1;
    }
    if toks.get(i).is_some_and(|t| t.is("#")) {
        i += 1;
        let start = i;
        skip_group(toks, &mut i);
        let inner = &toks[start + 1..i.saturating_sub(1).max(start + 1)];
        let mut params = Vec::new();
        ctx.parse_params(inner, &mut params);
        b.table.parameters.extend(params);
    }
    let mut non_ansi: Vec<String> = Vec::new();
    if toks.get(i).is_some_and(|t| t.is("(")) {
        let start = i;
        skip_group(toks, &mut i);
        let inner = &toks[start + 1..i.saturating_sub(1).max(start + 1)];
        let items = split_top(inner, ",");
        let ansi = items
            .first()
            .is_some_and(|it| it.len() > 1 || it.first().is_some_and(|t| Direction::from_word(&t.text).is_some()));
        if ansi {
            let mut dir = Direction::Input;
            let mut ty = DeclType { width: 1, fields: Vec::new(), explicit: false, resolved: true };
            for item in items {
                let mut j = 0;
                let mut restated = false;
                if let Some(d) = item.first().and_then(|t| Direction::from_word(&t.text)) {
                    dir = d;
                    j = 1;
                    restated = true;
                }
                if item.len() - j > 1 || restated {
                    ty = ctx.decl_type(&item, &mut j);
                }
                if let Some(n) = item.get(j).filter(|t| t.is_ident()) {
                    b.add_port(n.text.clone(), dir, &ty);
                }
            }
        } else {
            non_ansi =
                items.iter().filter_map(|it| it.first().filter(|t| t.is_ident()).map(|t| t.text.clone())).collect();
        }
    }
    if !toks.get(i).is_some_and(|t| t.is(";")) {
        let t = toks.get(i).unwrap_or(&toks[end]);
        return Err(parse_error(vec![ParseDiagnostic::error(
            DiagnosticKind::Syntax,
            t.line,
            t.column,
            format!("expected \";\" after module header, found \"{}\"", t.text),
        )]));
    }
    i += 1;
    for n in &non_ansi {
        b.table.ports.push(Port { name: n.clone(), direction: Direction::Input, width: 1, fields: Vec::new() });
    }
    let mut declared_dirs: Vec<String> = Vec::new();
    let mut in_sub = false;
    for stmt in statements(&toks[i..end]) {
        let mut k = 0;
        loop {
            let Some(t) = stmt.get(k) else { break };
            if t.is("endfunction") || t.is("endtask") {
                in_sub = false;
                k += 1;
            } else if BLOCK_NOISE.contains(&t.text.as_str()) && t.kind == TokenKind::Ident {
                k += 1;
            } else if t.is(":") && stmt.get(k + 1).is_some_and(|n| n.is_ident()) && k > 0 {
                k += 2;
            } else {
                break;
            }
        }
        let s = &stmt[k..];
        let Some(first) = s.first() else { continue };
        if in_sub {
            continue;
        }
        match first.text.as_str() {
            "function" | "task" => in_sub = true,
            "typedef" => ctx.parse_typedef(s),
            "parameter" | "localparam" => {
                let mut params = Vec::new();
                ctx.parse_params(&s[1..], &mut params);
                for p in params {
                    if !b.table.parameters.iter().any(|q| q.name == p.name) {
                        b.table.parameters.push(p);
                    }
                }
            }
            w if Direction::from_word(w).is_some() => {
                let dir = Direction::from_word(w).unwrap();
                let mut j = 1;
                let ty = ctx.decl_type(s, &mut j);
                for n in ctx.decl_names(s, j) {
                    declared_dirs.push(n.clone());
                    b.add_port(n, dir, &ty);
                }
            }
            w if builtin_width(w).is_some()
                || matches!(w, "signed" | "unsigned" | "const" | "static" | "automatic" | "var") =>
            {
                let mut j = 0;
                let ty = ctx.decl_type(s, &mut j);
                for n in ctx.decl_names(s, j) {
                    b.add_register(n, &ty);
                }
            }
            w if ctx.types.contains_key(w) => {
                let mut j = 0;
                let ty = ctx.decl_type(s, &mut j);
                for n in ctx.decl_names(s, j) {
                    b.add_register(n, &ty);
                }
                if let Some(info) = ctx.types.get(w) {
                    for (m, v) in info.enum_members.clone() {
                        if !b.table.parameters.iter().any(|p| p.name == m) {
                            b.table.parameters.push(Parameter { name: m, value: v });
                        }
                    }
                }
            }
            _ if first.is_ident()
                && s.get(1).is_some_and(|t| t.is("::"))
                && s.get(3).is_some_and(|t| t.is_ident())
                && !s.iter().any(|t| t.is("(")) =>
            {
                let mut j = 0;
                let ty = ctx.decl_type(s, &mut j);
                for n in ctx.decl_names(s, j) {
                    b.add_register(n, &ty);
                }
            }
            _ => {}
        }
    }
    // Enum members are usable as constants anywhere in the module.
    let mut enum_params: Vec<Parameter> = ctx
        .types
        .values()
        .flat_map(|t| t.enum_members.iter())
        .map(|(m, v)| Parameter { name: m.clone(), value: v.clone() })
        .collect();
    enum_params.sort_by(|a, b| a.name.cmp(&b.name));
    for p in enum_params {
        if !b.table.parameters.iter().any(|q| q.name == p.name) && !b.table.is_signal(&p.name) {
            b.table.parameters.push(p);
        }
    }
    Ok((b.table, end))
}

fn prepare(src: &str) -> Result<(Vec<Token>, Ctx), HdlError> {
    if src.trim().is_empty() {
        return Err(parse_error(vec![ParseDiagnostic::error(DiagnosticKind::Structure, 1, 1, "empty source")]));
    }
    let toks = tokenize(src).map_err(|d| parse_error(vec![d]))?;
    let diags = check_brackets(&toks);
    if !diags.is_empty() {
        return Err(parse_error(diags));
    }
    let mut ctx = Ctx { types: HashMap::new(), env: HashMap::new() };
    // Typedefs and parameters outside any module (packages, compilation unit).
    let mut depth = 0;
    let mut braces = 0i32;
    let mut stmt_start = 0;
    for (idx, t) in toks.iter().enumerate() {
        match t.text.as_str() {
            "{" if t.kind == TokenKind::Punct => braces += 1,
            "}" if t.kind == TokenKind::Punct => braces -= 1,
            "module" if t.is_ident() => depth += 1,
            "endmodule" if t.is_ident() => {
                depth -= 1;
                stmt_start = idx + 1;
            }
            "package" | "endpackage" if t.is_ident() => stmt_start = idx + 1,
            _ => {}
        }
        if depth == 0 && braces == 0 && t.is(";") {
            let s = &toks[stmt_start..idx];
            if s.first().is_some_and(|f| f.is("typedef")) {
                ctx.parse_typedef(s);
            } else if s.first().is_some_and(|f| f.is("parameter") || f.is("localparam")) {
                let mut sink = Vec::new();
                ctx.parse_params(&s[1..], &mut sink);
            }
            stmt_start = idx + 1;
        }
    }
    // Typedefs inside modules are visible to the whole module; collect them first.
    let mut module_typedefs = Vec::new();
    let mut start = 0;
    let mut braces = 0i32;
    for (idx, t) in toks.iter().enumerate() {
        if t.is("{") {
            braces += 1;
        } else if t.is("}") {
            braces -= 1;
        }
        if braces == 0 && (t.is(";") || t.is("begin") || t.is("end")) {
            if toks.get(start).is_some_and(|f| f.is("typedef")) && t.is(";") {
                module_typedefs.push(toks[start..idx].to_vec());
            }
            start = idx + 1;
        }
    }
    for td in module_typedefs {
        if !td.last().is_some_and(|n| ctx.types.contains_key(&n.text)) {
            ctx.parse_typedef(&td);
        }
    }
    Ok((toks, ctx))
}

/// Extracts the signal table of the first module in `src`.
pub fn parse_ports(src: &str) -> Result<SignalTable, HdlError> {
    let (toks, mut ctx) = prepare(src)?;
    let at = toks.iter().position(|t| t.is("module")).ok_or_else(|| {
        parse_error(vec![ParseDiagnostic::error(DiagnosticKind::Structure, 1, 1, "no \"module\" declaration found")])
    })?;
    parse_module_at(&mut ctx, &toks, at).map(|(t, _)| t)
}

/// Signal tables of every module in `src`, in source order.
pub fn parse_modules(src: &str) -> Result<Vec<SignalTable>, HdlError> {
    let (toks, mut ctx) = prepare(src)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is("module") {
            let (t, end) = parse_module_at(&mut ctx, &toks, i)?;
            out.push(t);
            i = end;
        }
        i += 1;
    }
    if out.is_empty() {
        return Err(parse_error(vec![ParseDiagnostic::error(
            DiagnosticKind::Structure,
            1,
            1,
            "no \"module\" declaration found",
        )]));
    }
    Ok(out)
}
