//! Pattern-driven vulnerability detection with module-window anchoring and
//! confidence gating.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use svw_hdl::{construct_evidence, module_spans, Construct, ModuleSpan};
use svw_llm::{ChatRequest, ChatResponse};

use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::text::{field, labeled, token_estimate};

pub const PATTERN_CATALOG: &str = include_str!("../data/vuln_patterns.tsv");
pub const QUERY_TEMPLATE: &str = "vuln_analyze";
pub const NO_PATTERNS_NOTE: &str = "no applicable patterns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternScope {
    Construct(Construct),
    Any,
}

impl PatternScope {
    fn parse(s: &str) -> Option<Self> {
        if s == "any" {
            Some(PatternScope::Any)
        } else {
            Construct::parse(s).map(PatternScope::Construct)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnPattern {
    pub pattern_id: String,
    pub title: String,
    pub query_template: String,
    pub applicable_constructs: Vec<PatternScope>,
    pub question: String,
}

impl VulnPattern {
    fn constructs(&self) -> impl Iterator<Item = Construct> + '_ {
        self.applicable_constructs.iter().filter_map(|s| match s {
            PatternScope::Construct(c) => Some(*c),
            PatternScope::Any => None,
        })
    }
}

pub fn parse_catalog(tsv: &str) -> Result<Vec<VulnPattern>, AgentError> {
    let mut out = Vec::new();
    for (n, line) in tsv.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, title, constructs, question] = cols[..] else {
            return Err(AgentError::Generation(format!("pattern catalog line {}: expected 4 columns", n + 1)));
        };
        let scopes = constructs
            .split(',')
            .map(|s| {
                PatternScope::parse(s.trim())
                    .ok_or_else(|| AgentError::Generation(format!("pattern {id}: unknown construct {s}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(VulnPattern {
            pattern_id: id.to_string(),
            title: title.to_string(),
            query_template: QUERY_TEMPLATE.to_string(),
            applicable_constructs: scopes,
            question: question.to_string(),
        });
    }
    Ok(out)
}

pub fn builtin_catalog() -> Vec<VulnPattern> {
    parse_catalog(PATTERN_CATALOG).expect("bundled catalog parses")
}

/// Patterns whose constructs occur in the design, plus every `any` pattern.
pub fn select_patterns(catalog: &[VulnPattern], design: &str) -> Result<Vec<VulnPattern>, AgentError> {
    if catalog.is_empty() {
        return Err(AgentError::CatalogMissing);
    }
    let found: BTreeSet<Construct> = construct_evidence(design).into_iter().map(|(c, _)| c).collect();
    Ok(catalog
        .iter()
        .filter(|p| {
            p.applicable_constructs.iter().any(|s| match s {
                PatternScope::Any => true,
                PatternScope::Construct(c) => found.contains(c),
            })
        })
        .cloned()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnVerdict {
    Vulnerable,
    NotVulnerable,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceLine {
    pub line: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnFinding {
    pub pattern_id: String,
    pub title: String,
    pub module: String,
    pub verdict: VulnVerdict,
    pub explanation: String,
    pub evidence_lines: Vec<EvidenceLine>,
    pub confidence: f64,
}

/// The part of the design shown to the model for one pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorWindow {
    pub module: String,
    pub start_line: usize,
    pub end_line: usize,
    /// Lines prefixed with their 1-based number.
    pub code: String,
}

fn whole_design_span(design: &str) -> ModuleSpan {
    ModuleSpan { name: "(design)".into(), start_line: 1, end_line: design.lines().count().max(1) }
}

/// Chooses the module containing the pattern's construct evidence (the first
/// module when there is none) and numbers its lines.
pub fn anchor(design: &str, pattern: &VulnPattern, limit: usize) -> Result<AnchorWindow, AgentError> {
    let spans = module_spans(design);
    let wanted: Vec<Construct> = pattern.constructs().collect();
    let idents: HashSet<String> =
        construct_evidence(design).into_iter().filter(|(c, _)| wanted.contains(c)).flat_map(|(_, s)| s).collect();
    let lines: Vec<&str> = design.lines().collect();
    let mentions = |span: &ModuleSpan| {
        lines[span.start_line.saturating_sub(1)..span.end_line.min(lines.len())]
            .iter()
            .any(|l| l.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| idents.contains(w)))
    };
    let span =
        spans.iter().find(|s| mentions(s)).or(spans.first()).cloned().unwrap_or_else(|| whole_design_span(design));
    let mut code = String::new();
    for n in span.start_line..=span.end_line.min(lines.len()) {
        code.push_str(&format!("{n:>4}: {}\n", lines[n - 1]));
    }
    let tokens = token_estimate(&code);
    if tokens > limit {
        return Err(AgentError::Anchoring { module: span.name, tokens, limit });
    }
    Ok(AnchorWindow { module: span.name, start_line: span.start_line, end_line: span.end_line, code })
}

struct ParsedVerdict {
    vulnerable: bool,
    lines: Vec<usize>,
    explanation: String,
}

fn parse_verdict(text: &str) -> Option<ParsedVerdict> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    let v = field(first, "verdict")?.to_ascii_lowercase();
    let vulnerable = match v.trim_end_matches('.') {
        "vulnerable" => true,
        "not_vulnerable" | "not vulnerable" => false,
        _ => return None,
    };
    let lines = labeled(text, "lines")
        .unwrap_or("")
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter_map(|s| s.trim().parse().ok())
        .collect();
    Some(ParsedVerdict { vulnerable, lines, explanation: labeled(text, "explanation").unwrap_or("").to_string() })
}

fn analysis_request(pattern: &VulnPattern, window: &AnchorWindow) -> ChatRequest {
    ChatRequest::new(&pattern.query_template)
        .var("pattern_title", &pattern.title)
        .var("question", &pattern.question)
        .var("module", &window.module)
        .var("code", &window.code)
        .max_tokens(512)
}

/// Runs one pattern query. Verdicts below the confidence threshold become
/// uncertain; evidence lines outside the window are dropped.
pub fn analyze(env: &AgentEnv, design: &str, pattern: &VulnPattern) -> Result<VulnFinding, AgentError> {
    if design.trim().is_empty() {
        return Err(AgentError::Precondition("design text is empty".into()));
    }
    let window = anchor(design, pattern, env.context_window_limit)?;
    let mut reply: ChatResponse = env.complete(&analysis_request(pattern, &window))?;
    let mut parsed = parse_verdict(&reply.text);
    if parsed.is_none() {
        reply = env.complete(&ChatRequest::new("vuln_reformat").var("previous", &reply.text).max_tokens(512))?;
        parsed = parse_verdict(&reply.text);
    }
    let confidence = reply.effective_confidence();
    let Some(p) = parsed else {
        return Ok(VulnFinding {
            pattern_id: pattern.pattern_id.clone(),
            title: pattern.title.clone(),
            module: window.module,
            verdict: VulnVerdict::Uncertain,
            explanation: format!("unparseable analysis: {}", reply.text.trim()),
            evidence_lines: Vec::new(),
            confidence,
        });
    };
    let lines: Vec<&str> = design.lines().collect();
    let mut seen = BTreeSet::new();
    let evidence_lines = p
        .lines
        .into_iter()
        .filter(|n| (window.start_line..=window.end_line).contains(n) && *n <= lines.len() && seen.insert(*n))
        .map(|n| EvidenceLine { line: n, source: lines[n - 1].to_string() })
        .collect();
    let verdict = if confidence < env.confidence_threshold {
        VulnVerdict::Uncertain
    } else if p.vulnerable {
        VulnVerdict::Vulnerable
    } else {
        VulnVerdict::NotVulnerable
    };
    Ok(VulnFinding {
        pattern_id: pattern.pattern_id.clone(),
        title: pattern.title.clone(),
        module: window.module,
        verdict,
        explanation: p.explanation,
        evidence_lines,
        confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCoverage {
    pub pattern_id: String,
    pub title: String,
    pub analyzed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnReport {
    pub design: String,
    pub backend_id: String,
    pub findings: Vec<VulnFinding>,
    pub coverage: Vec<PatternCoverage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Summary of the vulnerable findings, consumed by bug validation.
    #[serde(rename = "bug description")]
    pub bug_description: String,
}

fn rank(v: VulnVerdict) -> u8 {
    match v {
        VulnVerdict::Vulnerable => 0,
        VulnVerdict::NotVulnerable => 1,
        VulnVerdict::Uncertain => 2,
    }
}

/// Sorts vulnerable first, then by confidence; drops repeats of the same
/// (pattern, first evidence line).
pub fn report(design: &str, backend_id: &str, catalog: &[VulnPattern], findings: Vec<VulnFinding>) -> VulnReport {
    let mut findings = findings;
    findings.sort_by(|a, b| {
        rank(a.verdict)
            .cmp(&rank(b.verdict))
            .then(b.confidence.total_cmp(&a.confidence))
            .then(a.pattern_id.cmp(&b.pattern_id))
    });
    let mut seen = HashSet::new();
    findings.retain(|f| seen.insert((f.pattern_id.clone(), f.evidence_lines.first().map(|e| e.line))));
    let analyzed: HashSet<&str> = findings.iter().map(|f| f.pattern_id.as_str()).collect();
    let coverage = catalog
        .iter()
        .map(|p| PatternCoverage {
            pattern_id: p.pattern_id.clone(),
            title: p.title.clone(),
            analyzed: analyzed.contains(p.pattern_id.as_str()),
        })
        .collect();
    let bug_description = findings
        .iter()
        .filter(|f| f.verdict == VulnVerdict::Vulnerable)
        .map(|f| {
            let lines: Vec<String> =
                f.evidence_lines.iter().map(|e| format!("line {}: {}", e.line, e.source.trim())).collect();
            let mut s = format!("{} in module {}: {}", f.title, f.module, f.explanation);
            if !lines.is_empty() {
                s.push_str(&format!(" ({})", lines.join("; ")));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n");
    VulnReport {
        design: design.to_string(),
        backend_id: backend_id.to_string(),
        note: findings.is_empty().then(|| NO_PATTERNS_NOTE.to_string()),
        findings,
        coverage,
        bug_description,
    }
}
