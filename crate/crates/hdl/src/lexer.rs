//! Verilog/SystemVerilog tokenizer covering what the checkers need.
//!
//! Comments are dropped. Keywords come out as [`TokenKind::Ident`]; callers
//! compare the text.

use crate::diag::{DiagnosticKind, ParseDiagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    /// Any numeric literal: `12`, `1'b0`, `128'hA5`, `'0`, `3.5`.
    Number,
    /// `$strobe`, `$past`, ...
    System,
    /// `` `define `` and friends.
    Directive,
    Str,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub column: usize,
    /// Byte offset of the first character.
    pub offset: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && self.kind != TokenKind::Str
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }

    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

const PUNCT: &[&str] = &[
    "<<<=", ">>>=", "|->", "|=>", "===", "!==", "==?", "!=?", "<<<", ">>>", "<<=", ">>=", "##", "==", "!=", "<=", ">=",
    "&&", "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "->", "::", "+:", "-:", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "(", ")", "[", "]", "{", "}", ";", ",", ".", ":", "?", "@", "#", "=", "+", "-", "*", "/",
    "%", "&", "|", "^", "~", "!", "<", ">", "'",
];

/// Verilog reserved words that can never name a signal.
pub const KEYWORDS: &[&str] = &[
    "always",
    "always_comb",
    "always_ff",
    "always_latch",
    "and",
    "assert",
    "assign",
    "assume",
    "automatic",
    "begin",
    "bit",
    "buf",
    "byte",
    "case",
    "casex",
    "casez",
    "cover",
    "default",
    "defparam",
    "disable",
    "do",
    "else",
    "end",
    "endcase",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endpackage",
    "endproperty",
    "endsequence",
    "endtask",
    "enum",
    "event",
    "final",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "if",
    "iff",
    "import",
    "initial",
    "inout",
    "input",
    "int",
    "integer",
    "join",
    "join_any",
    "join_none",
    "localparam",
    "logic",
    "longint",
    "module",
    "negedge",
    "nor",
    "not",
    "or",
    "output",
    "package",
    "packed",
    "parameter",
    "posedge",
    "property",
    "real",
    "reg",
    "release",
    "repeat",
    "return",
    "sequence",
    "shortint",
    "signed",
    "string",
    "struct",
    "task",
    "time",
    "tri",
    "typedef",
    "union",
    "unique",
    "unsigned",
    "var",
    "void",
    "wait",
    "while",
    "wire",
    "xor",
    "xnor",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_based_digit(c: char) -> bool {
    c.is_ascii_hexdigit() || matches!(c, '_' | 'x' | 'X' | 'z' | 'Z' | '?')
}

/// Consumes `'[sS]<base><digits>` if present. Returns false (and consumes
/// nothing) when the apostrophe does not start a based literal.
fn based_suffix(cur: &mut Cursor<'_>) -> bool {
    if cur.peek() != Some('\'') {
        return false;
    }
    let mut n = 1;
    if matches!(cur.peek_at(n), Some('s' | 'S')) {
        n += 1;
    }
    if !matches!(cur.peek_at(n), Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H')) {
        return false;
    }
    for _ in 0..=n {
        cur.bump();
    }
    // Whitespace between base and digits is legal Verilog.
    cur.bump_while(|c| c == ' ' || c == '\t');
    cur.bump_while(is_based_digit);
    true
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut cur = Cursor { src, pos: 0, line: 1, column: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (line, column, offset) = (cur.line, cur.column, cur.pos);
        let rest = cur.rest();
        if rest.starts_with("//") {
            cur.bump_while(|c| c != '\n');
            continue;
        }
        if rest.starts_with("/*") {
            match rest[2..].find("*/") {
                Some(end) => {
                    let stop = cur.pos + 2 + end + 2;
                    while cur.pos < stop {
                        cur.bump();
                    }
                    continue;
                }
                None => {
                    return Err(ParseDiagnostic::error(
                        DiagnosticKind::Lexical,
                        line,
                        column,
                        "unterminated block comment \"/*\"",
                    ))
                }
            }
        }
        let kind = if is_ident_start(c) {
            cur.bump_while(is_ident_char);
            TokenKind::Ident
        } else if c == '\\' {
            cur.bump();
            cur.bump_while(|c| !c.is_whitespace());
            if cur.pos - offset == 1 {
                return Err(ParseDiagnostic::error(DiagnosticKind::Lexical, line, column, "stray \"\\\""));
            }
            TokenKind::Ident
        } else if c == '$' {
            cur.bump();
            cur.bump_while(is_ident_char);
            TokenKind::System
        } else if c == '`' {
            cur.bump();
            cur.bump_while(is_ident_char);
            TokenKind::Directive
        } else if c == '"' {
            cur.bump();
            loop {
                match cur.bump() {
                    Some('\\') => {
                        cur.bump();
                    }
                    Some('"') => break,
                    Some('\n') | None => {
                        return Err(ParseDiagnostic::error(
                            DiagnosticKind::Lexical,
                            line,
                            column,
                            "unterminated string literal",
                        ))
                    }
                    Some(_) => {}
                }
            }
            TokenKind::Str
        } else if c.is_ascii_digit() {
            cur.bump_while(|c| c.is_ascii_digit() || c == '_');
            if !based_suffix(&mut cur) && cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())
            {
                cur.bump();
                cur.bump_while(|c| c.is_ascii_digit() || c == '_');
            }
            TokenKind::Number
        } else if c == '\''
            && (based_suffix(&mut cur)
                || matches!(cur.peek_at(1), Some('0' | '1' | 'x' | 'X' | 'z' | 'Z'))
                    && !cur.peek_at(2).is_some_and(is_ident_char))
        {
            if cur.pos == offset {
                // Unbased fill literal such as '0.
                cur.bump();
                cur.bump();
            }
            TokenKind::Number
        } else if let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) {
            for _ in 0..p.chars().count() {
                cur.bump();
            }
            TokenKind::Punct
        } else {
            return Err(ParseDiagnostic::error(
                DiagnosticKind::Lexical,
                line,
                column,
                format!("unexpected character {c:?}"),
            ));
        };
        out.push(Token { kind, text: src[offset..cur.pos].to_string(), line, column, offset });
    }
    Ok(out)
}
