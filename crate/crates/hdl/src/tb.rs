//! Structural checks for generated testbenches: block balance, signals
//! driven before they are declared, a clock toggle, a logging statement and
//! a well-formed instantiation of the design under test.

use std::collections::HashMap;

use crate::diag::{DiagnosticKind, ParseDiagnostic};
use crate::lexer::{is_keyword, tokenize, Token, TokenKind};
use crate::ports::{check_brackets, SignalTable};

const BLOCKS: &[(&str, &[&str])] = &[
    ("module", &["endmodule"]),
    ("begin", &["end"]),
    ("case", &["endcase"]),
    ("casex", &["endcase"]),
    ("casez", &["endcase"]),
    ("fork", &["join", "join_any", "join_none"]),
    ("function", &["endfunction"]),
    ("task", &["endtask"]),
    ("generate", &["endgenerate"]),
];

const DECL_WORDS: &[&str] = &[
    "reg",
    "wire",
    "logic",
    "integer",
    "int",
    "bit",
    "time",
    "real",
    "realtime",
    "genvar",
    "parameter",
    "localparam",
    "input",
    "output",
    "inout",
    "event",
    "byte",
    "string",
    "shortint",
    "longint",
    "tri",
];

const LOG_TASKS: &[&str] = &["$strobe", "$display", "$monitor", "$write", "$fwrite", "$fdisplay"];

fn err(kind: DiagnosticKind, t: &Token, msg: String) -> ParseDiagnostic {
    ParseDiagnostic::error(kind, t.line, t.column, msg)
}

fn check_blocks(toks: &[Token]) -> Vec<ParseDiagnostic> {
    let mut stack: Vec<&Token> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Ident {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| toks[p].text.as_str());
        if t.text == "fork" && matches!(prev, Some("disable" | "wait")) {
            continue;
        }
        if BLOCKS.iter().any(|(open, _)| *open == t.text) {
            stack.push(t);
            continue;
        }
        let Some((opener, _)) = BLOCKS.iter().find(|(_, closes)| closes.contains(&t.text.as_str())) else {
            continue;
        };
        match stack.pop() {
            Some(open) if BLOCKS.iter().any(|(o, c)| *o == open.text && c.contains(&t.text.as_str())) => {}
            Some(open) => {
                return vec![err(
                    DiagnosticKind::Unbalanced,
                    t,
                    format!("\"{}\" closes \"{}\" opened at line {}", t.text, open.text, open.line),
                )]
            }
            None => {
                return vec![err(DiagnosticKind::Unbalanced, t, format!("\"{}\" has no matching \"{opener}\"", t.text))]
            }
        }
    }
    stack
        .last()
        .map(|open| vec![err(DiagnosticKind::Unbalanced, open, format!("\"{}\" is never closed", open.text))])
        .unwrap_or_default()
}

/// Index just past a balanced group starting at `i` (which must be an opener).
fn skip_group(toks: &[Token], i: usize) -> usize {
    let mut depth = 0i32;
    let mut j = i;
    while j < toks.len() {
        match toks[j].text.as_str() {
            "(" | "[" | "{" if toks[j].kind == TokenKind::Punct => depth += 1,
            ")" | "]" | "}" if toks[j].kind == TokenKind::Punct => {
                depth -= 1;
                if depth == 0 {
                    return j + 1;
                }
            }
            _ => {}
        }
        j += 1;
    }
    j
}

/// First offset at which each name is declared (variables, ports,
/// parameters, instances, functions and tasks).
fn declarations(toks: &[Token]) -> HashMap<String, usize> {
    let mut decl: HashMap<String, usize> = HashMap::new();
    let mut add = |name: &str, offset: usize| {
        decl.entry(name.to_string()).or_insert(offset);
    };
    let n = toks.len();
    let mut i = 0;
    while i < n {
        let t = &toks[i];
        let after_dot = i > 0 && toks[i - 1].is(".");
        if t.is_ident() && !after_dot && (t.text == "function" || t.text == "task") {
            // Name is the last identifier before `(` or `;`.
            let mut j = i + 1;
            let mut name = None;
            while j < n && !toks[j].is("(") && !toks[j].is(";") {
                if toks[j].is("[") {
                    j = skip_group(toks, j);
                    continue;
                }
                if toks[j].is_ident() && !is_keyword(&toks[j].text) {
                    name = Some(&toks[j]);
                }
                j += 1;
            }
            if let Some(nm) = name {
                add(&nm.text, nm.offset);
            }
            i += 1;
            continue;
        }
        if t.is_ident() && !after_dot && DECL_WORDS.contains(&t.text.as_str()) {
            let mut j = i + 1;
            loop {
                while j < n
                    && (toks[j].is("signed")
                        || toks[j].is("unsigned")
                        || DECL_WORDS.contains(&toks[j].text.as_str()) && toks[j].is_ident())
                {
                    j += 1;
                }
                if j < n && toks[j].is("[") {
                    j = skip_group(toks, j);
                    continue;
                }
                break;
            }
            while j < n && toks[j].is_ident() && !is_keyword(&toks[j].text) {
                add(&toks[j].text, toks[j].offset);
                j += 1;
                while j < n && toks[j].is("[") {
                    j = skip_group(toks, j);
                }
                if j < n && toks[j].is("=") {
                    while j < n && !toks[j].is(",") && !toks[j].is(";") && !toks[j].is(")") {
                        if toks[j].is("(") || toks[j].is("{") || toks[j].is("[") {
                            j = skip_group(toks, j);
                        } else {
                            j += 1;
                        }
                    }
                }
                if j < n && toks[j].is(",") && toks.get(j + 1).is_some_and(|t| t.is_ident() && !is_keyword(&t.text)) {
                    j += 1;
                } else {
                    break;
                }
            }
            i = j.max(i + 1);
            continue;
        }
        // Instance: `Type [#(...)] name (`.
        if t.is_ident() && !is_keyword(&t.text) && !after_dot {
            let mut j = i + 1;
            if j < n && toks[j].is("#") && toks.get(j + 1).is_some_and(|t| t.is("(")) {
                j = skip_group(toks, j + 1);
            }
            if j + 1 < n && toks[j].is_ident() && !is_keyword(&toks[j].text) && toks[j + 1].is("(") {
                add(&toks[j].text, toks[j].offset);
            }
        }
        i += 1;
    }
    decl
}

fn is_statement_boundary(toks: &[Token], i: usize) -> bool {
    let Some(prev) = i.checked_sub(1).map(|p| &toks[p]) else {
        return false;
    };
    if prev.kind == TokenKind::Number && i >= 2 && toks[i - 2].is("#") {
        return true;
    }
    if prev.is("(") {
        return i >= 2 && toks[i - 2].is("for");
    }
    [";", "begin", "end", "else", ")", ":", "assign", "force", "initial", "always"].iter().any(|b| prev.is(b))
}

fn check_drivers(toks: &[Token], decl: &HashMap<String, usize>) -> Vec<ParseDiagnostic> {
    let mut out = Vec::new();
    let mut reported = std::collections::HashSet::new();
    for i in 0..toks.len() {
        let t = &toks[i];
        if !t.is_ident() || is_keyword(&t.text) || !is_statement_boundary(toks, i) {
            continue;
        }
        let mut j = i + 1;
        loop {
            if j < toks.len() && toks[j].is("[") {
                j = skip_group(toks, j);
            } else if j + 1 < toks.len() && toks[j].is(".") && toks[j + 1].is_ident() {
                j += 2;
            } else {
                break;
            }
        }
        if !toks.get(j).is_some_and(|n| n.is("=") || n.is("<=")) {
            continue;
        }
        let msg = match decl.get(&t.text) {
            Some(&off) if off <= t.offset => continue,
            Some(_) => format!("signal \"{}\" is driven before it is declared", t.text),
            None => format!("signal \"{}\" is driven but never declared", t.text),
        };
        if reported.insert(t.text.clone()) {
            out.push(err(DiagnosticKind::UndeclaredSignal, t, msg));
        }
    }
    out
}

fn has_clock_toggle(toks: &[Token]) -> bool {
    toks.windows(4).any(|w| {
        w[0].is_ident()
            && (w[1].is("=") || w[1].is("<="))
            && (w[2].is("~") || w[2].is("!"))
            && w[3].is_ident()
            && w[0].text == w[3].text
    })
}

fn check_instance(toks: &[Token], dut: &SignalTable, decl: &HashMap<String, usize>) -> Vec<ParseDiagnostic> {
    let n = toks.len();
    let mut start = None;
    for i in 0..n {
        if !toks[i].is_ident() || toks[i].text != dut.module_name || (i > 0 && toks[i - 1].is("module")) {
            continue;
        }
        let mut j = i + 1;
        if j < n && toks[j].is("#") && toks.get(j + 1).is_some_and(|t| t.is("(")) {
            j = skip_group(toks, j + 1);
        }
        if j + 1 < n && toks[j].is_ident() && toks[j + 1].is("(") {
            start = Some((i, j + 1));
            break;
        }
    }
    let Some((ty, open)) = start else {
        let (line, column) = toks.first().map(|t| (t.line, t.column)).unwrap_or((1, 1));
        return vec![ParseDiagnostic::error(
            DiagnosticKind::Structure,
            line,
            column,
            format!("design \"{}\" is never instantiated", dut.module_name),
        )];
    };
    let close = skip_group(toks, open) - 1;
    // Split the connection list at top-level commas.
    let mut conns: Vec<&[Token]> = Vec::new();
    let mut depth = 0;
    let mut from = open + 1;
    for k in open + 1..close {
        match toks[k].text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => {
                conns.push(&toks[from..k]);
                from = k + 1;
            }
            _ => {}
        }
    }
    if from < close || !conns.is_empty() {
        conns.push(&toks[from..close]);
    }
    let mut out = Vec::new();
    let check_idents = |expr: &[Token], port: &str, out: &mut Vec<ParseDiagnostic>| {
        for (k, t) in expr.iter().enumerate() {
            let member = k > 0 && expr[k - 1].is(".");
            if t.is_ident() && !is_keyword(&t.text) && !member && !decl.contains_key(&t.text) {
                out.push(err(
                    DiagnosticKind::UndeclaredSignal,
                    t,
                    format!("undeclared signal \"{}\" connected to port \"{port}\"", t.text),
                ));
            }
        }
    };
    let named = conns.first().is_some_and(|c| c.first().is_some_and(|t| t.is(".")));
    if named {
        for c in &conns {
            if c.len() >= 2 && c[0].is(".") && c[1].is("*") {
                continue;
            }
            let Some(port) = c.get(1).filter(|t| c[0].is(".") && t.is_ident()) else {
                let at = c.first().unwrap_or(&toks[open]);
                out.push(err(DiagnosticKind::Syntax, at, "mixed named and positional connections".to_string()));
                continue;
            };
            if dut.port(&port.text).is_none() {
                out.push(err(
                    DiagnosticKind::UnknownPort,
                    port,
                    format!("unknown port \"{}\" on \"{}\"", port.text, dut.module_name),
                ));
            }
            if c.len() > 2 {
                check_idents(&c[3..c.len().saturating_sub(1).max(3)], &port.text, &mut out);
            } else if !decl.contains_key(&port.text) {
                out.push(err(
                    DiagnosticKind::UndeclaredSignal,
                    port,
                    format!("undeclared signal \"{}\" connected to port \"{}\"", port.text, port.text),
                ));
            }
        }
    } else {
        if conns.len() != dut.ports.len() {
            out.push(err(
                DiagnosticKind::PortArity,
                &toks[ty],
                format!(
                    "\"{}\" has {} ports but {} positional connections",
                    dut.module_name,
                    dut.ports.len(),
                    conns.len()
                ),
            ));
        }
        for (c, p) in conns.iter().zip(dut.ports.iter()) {
            check_idents(c, &p.name, &mut out);
        }
    }
    out
}

/// Checks a testbench. Returns every problem found; an empty list means the
/// testbench passed. Lexical and bracket errors stop further checks.
pub fn check_testbench_syntax(src: &str, dut: Option<&SignalTable>) -> Vec<ParseDiagnostic> {
    let toks = match tokenize(src) {
        Ok(t) => t,
        Err(d) => return vec![d],
    };
    let brackets = check_brackets(&toks);
    if !brackets.is_empty() {
        return brackets;
    }
    let mut out = check_blocks(&toks);
    let decl = declarations(&toks);
    out.extend(check_drivers(&toks, &decl));
    if !has_clock_toggle(&toks) {
        out.push(ParseDiagnostic::error(
            DiagnosticKind::Structure,
            1,
            1,
            "no clock toggle such as \"always #5 clk = ~clk\"",
        ));
    }
    if !toks.iter().any(|t| t.kind == TokenKind::System && LOG_TASKS.contains(&t.text.as_str())) {
        out.push(ParseDiagnostic::error(
            DiagnosticKind::Structure,
            1,
            1,
            "no logging statement ($strobe, $display or $monitor)",
        ));
    }
    if let Some(dut) = dut {
        out.extend(check_instance(&toks, dut, &decl));
    }
    out.sort_by_key(|d| (d.line, d.column));
    out
}
