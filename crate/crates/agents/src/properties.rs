//! Security property generation: design classification, CWE mapping and
//! intersection, SVA generation and self-reflection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use svw_hdl::{
    check_sva, check_sva_file, construct_evidence, identifier_words, print_assertion, Construct, DiagnosticKind,
    ParseDiagnostic, SignalTable, SvaAssertion, SvaOptions,
};
use svw_llm::ChatRequest;

use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::text::{field, is_none_reply, list, normalize_phrase};

pub const CWE_TABLE: &str = include_str!("../data/cwe.tsv");
pub const CATEGORY_CWE_TABLE: &str = include_str!("../data/category_cwe.tsv");
pub const THREAT_CWE_TABLE: &str = include_str!("../data/threat_cwe.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignCategory {
    DmaController,
    DebugInterface,
    CryptoBlock,
    FsmController,
    BusFabric,
    MemoryInterface,
    Peripheral,
}

impl DesignCategory {
    pub const ALL: [DesignCategory; 7] = [
        DesignCategory::DmaController,
        DesignCategory::DebugInterface,
        DesignCategory::CryptoBlock,
        DesignCategory::FsmController,
        DesignCategory::BusFabric,
        DesignCategory::MemoryInterface,
        DesignCategory::Peripheral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignCategory::DmaController => "dma_controller",
            DesignCategory::DebugInterface => "debug_interface",
            DesignCategory::CryptoBlock => "crypto_block",
            DesignCategory::FsmController => "fsm_controller",
            DesignCategory::BusFabric => "bus_fabric",
            DesignCategory::MemoryInterface => "memory_interface",
            DesignCategory::Peripheral => "peripheral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s.trim().to_ascii_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CweId {
    pub id: u32,
    pub title: String,
}

#[derive(Debug, Clone)]
pub struct CweEntry {
    pub id: u32,
    pub title: String,
    pub description: String,
}

/// The bundled CWE catalog and the two lookup tables.
#[derive(Debug, Clone)]
pub struct CweTables {
    pub cwes: BTreeMap<u32, CweEntry>,
    pub by_category: BTreeMap<DesignCategory, Vec<u32>>,
    pub by_threat: BTreeMap<String, Vec<u32>>,
}

fn tsv_rows(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).map(|l| l.split('\t').collect())
}

fn id_list(s: &str) -> Result<Vec<u32>, String> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad CWE id {x:?}"))).collect()
}

impl CweTables {
    pub fn parse(cwe: &str, category: &str, threat: &str) -> Result<Self, String> {
        let mut cwes = BTreeMap::new();
        for r in tsv_rows(cwe) {
            let [id, title, description] = r[..] else {
                return Err(format!("CWE row {r:?} needs 3 columns"));
            };
            let id: u32 = id.parse().map_err(|_| format!("bad CWE id {id:?}"))?;
            cwes.insert(id, CweEntry { id, title: title.into(), description: description.into() });
        }
        let known = |ids: Vec<u32>| -> Result<Vec<u32>, String> {
            match ids.iter().find(|i| !cwes.contains_key(i)) {
                Some(i) => Err(format!("CWE-{i} is not in the catalog")),
                None => Ok(ids),
            }
        };
        let mut by_category = BTreeMap::new();
        for r in tsv_rows(category) {
            let [c, ids] = r[..] else {
                return Err(format!("category row {r:?} needs 2 columns"));
            };
            let c = DesignCategory::parse(c).ok_or_else(|| format!("unknown category {c:?}"))?;
            by_category.insert(c, known(id_list(ids)?)?);
        }
        let mut by_threat = BTreeMap::new();
        for r in tsv_rows(threat) {
            let [p, ids] = r[..] else {
                return Err(format!("threat row {r:?} needs 2 columns"));
            };
            by_threat.insert(normalize_phrase(p), known(id_list(ids)?)?);
        }
        Ok(Self { cwes, by_category, by_threat })
    }

    pub fn builtin() -> Self {
        Self::parse(CWE_TABLE, CATEGORY_CWE_TABLE, THREAT_CWE_TABLE).expect("bundled CWE tables parse")
    }

    pub fn cwe(&self, id: u32) -> Option<CweId> {
        self.cwes.get(&id).map(|e| CweId { id, title: e.title.clone() })
    }

    fn ids(&self, ids: impl IntoIterator<Item = u32>) -> Vec<CweId> {
        let set: BTreeSet<u32> = ids.into_iter().collect();
        set.into_iter().filter_map(|i| self.cwe(i)).collect()
    }

    /// Union of the table rows of every category, ascending.
    pub fn map_design(&self, classification: &DesignClassification) -> Vec<CweId> {
        self.ids(classification.categories.iter().flat_map(|c| self.by_category.get(c).cloned().unwrap_or_default()))
    }

    /// Returns the CWEs and the phrases with no table entry.
    pub fn map_threats(&self, vectors: &[String]) -> (Vec<CweId>, Vec<String>) {
        let mut ids = Vec::new();
        let mut unknown = Vec::new();
        for v in vectors {
            match self.by_threat.get(&normalize_phrase(v)) {
                Some(row) => ids.extend(row.iter().copied()),
                None if !unknown.contains(v) => {
                    tracing::warn!(phrase = %v, "threat vector has no CWE mapping");
                    unknown.push(v.clone());
                }
                None => {}
            }
        }
        (self.ids(ids), unknown)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CweSelection {
    pub cwes: Vec<CweId>,
    /// Set when the lists did not intersect and the union was used instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn intersect_cwe(design: &[CweId], threats: &[CweId]) -> CweSelection {
    let a: BTreeSet<&CweId> = design.iter().collect();
    let b: BTreeSet<&CweId> = threats.iter().collect();
    let both: Vec<CweId> = a.intersection(&b).map(|c| (*c).clone()).collect();
    if !both.is_empty() {
        return CweSelection { cwes: both, warning: None };
    }
    let union: Vec<CweId> = a.union(&b).map(|c| (*c).clone()).collect();
    let warning = format!(
        "design and threat CWE lists do not intersect; generating for all {} CWEs of their union (unfiltered)",
        union.len()
    );
    tracing::warn!("{warning}");
    CweSelection { cwes: union, warning: Some(warning) }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignClassification {
    pub categories: Vec<DesignCategory>,
    pub evidence: BTreeMap<DesignCategory, BTreeSet<String>>,
}

fn word_category(word: &str) -> Option<DesignCategory> {
    match word {
        "dma" => Some(DesignCategory::DmaController),
        "mem" | "memory" | "sram" | "ram" | "rom" => Some(DesignCategory::MemoryInterface),
        "uart" | "spi" | "i2c" | "gpio" | "pwm" | "timer" => Some(DesignCategory::Peripheral),
        _ => None,
    }
}

/// Keyword and port scan only.
pub fn rule_classification(design: &str, table: &SignalTable) -> DesignClassification {
    let mut evidence: BTreeMap<DesignCategory, BTreeSet<String>> = BTreeMap::new();
    for (c, hits) in construct_evidence(design) {
        let cat = match c {
            Construct::Debug => DesignCategory::DebugInterface,
            Construct::Crypto => DesignCategory::CryptoBlock,
            Construct::Fsm => DesignCategory::FsmController,
            Construct::Bus => DesignCategory::BusFabric,
            Construct::AccessControl | Construct::Reset => continue,
        };
        evidence.entry(cat).or_default().extend(hits);
    }
    let names = std::iter::once(table.module_name.as_str()).chain(table.signal_names());
    for n in names {
        for w in identifier_words(n) {
            if let Some(cat) = word_category(&w) {
                evidence.entry(cat).or_default().insert(n.to_string());
            }
        }
    }
    DesignClassification { categories: evidence.keys().copied().collect(), evidence }
}

/// Rule scan, then the backend may add categories, each backed by signals
/// that exist in the design. Categories without evidence are dropped.
pub fn classify_design(env: &AgentEnv, design: &str, table: &SignalTable) -> Result<DesignClassification, AgentError> {
    let mut c = rule_classification(design, table);
    let evidence_text: String = c
        .evidence
        .iter()
        .map(|(k, v)| format!("{}: {}\n", k.as_str(), v.iter().cloned().collect::<Vec<_>>().join(", ")))
        .collect();
    let reply = env.complete(
        &ChatRequest::new("classify_design")
            .var("module", &table.module_name)
            .var("signals", signal_listing(table))
            .var("evidence", if evidence_text.is_empty() { "(none)".into() } else { evidence_text })
            .max_tokens(256),
    )?;
    for line in reply.text.lines() {
        let Some((cat, sigs)) = line.split_once('|') else {
            continue;
        };
        let Some(cat) = field(cat, "category").and_then(DesignCategory::parse) else {
            continue;
        };
        let sigs: Vec<String> = field(sigs, "signals")
            .map(|s| list(s, ','))
            .unwrap_or_default()
            .into_iter()
            .filter(|s| table.is_signal(s) || table.module_name == *s)
            .collect();
        if !sigs.is_empty() {
            c.evidence.entry(cat).or_default().extend(sigs);
        }
    }
    c.evidence.retain(|_, v| !v.is_empty());
    c.categories = c.evidence.keys().copied().collect();
    Ok(c)
}

/// Ports, registers and struct members with widths.
pub fn signal_listing(table: &SignalTable) -> String {
    let mut s = String::new();
    for p in &table.ports {
        let _ = writeln!(s, "{} {} [{}]", p.name, p.direction.as_str(), p.width);
        for f in &p.fields {
            let _ = writeln!(s, "{}.{} [{}]", p.name, f.name, f.width);
        }
    }
    for r in &table.registers {
        let _ = writeln!(s, "{} reg [{}]", r.name, r.width);
        for f in &r.fields {
            let _ = writeln!(s, "{}.{} [{}]", r.name, f.name, f.width);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum PropertyStatus {
    Candidate,
    Validated,
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedProperty {
    pub cwe: CweId,
    pub scenario: String,
    pub nl_property: String,
    /// Assertion text; canonical once validated.
    pub sva: String,
    pub status: PropertyStatus,
}

impl GeneratedProperty {
    pub fn is_validated(&self) -> bool {
        self.status == PropertyStatus::Validated
    }
}

/// The `sva:` label may be followed by a multi-line assertion.
fn sva_text(text: &str) -> Option<String> {
    let mut lines = text.lines();
    let mut out = String::new();
    for l in lines.by_ref() {
        if let Some(v) = field(l, "sva") {
            out.push_str(v);
            break;
        }
    }
    for l in lines {
        if field(l, "scenario").is_some() || field(l, "property").is_some() {
            break;
        }
        out.push('\n');
        out.push_str(l);
    }
    let out = out.trim().trim_matches('`').trim().to_string();
    (!out.is_empty()).then_some(out)
}

fn parse_triple(text: &str) -> Option<(String, String, String)> {
    let get = |label| text.lines().find_map(|l| field(l, label)).filter(|v| !v.is_empty());
    Some((get("scenario")?.to_string(), get("property")?.to_string(), sva_text(text)?))
}

fn reset_text(table: &SignalTable) -> String {
    match table.reset() {
        Some((r, true)) => format!("{r} (active low)"),
        Some((r, false)) => format!("{r} (active high)"),
        None => "(none)".into(),
    }
}

/// One request per CWE. Unparseable replies get one reformat request;
/// `none` and still-unparseable replies skip the CWE with a warning.
pub fn generate_properties(
    env: &AgentEnv,
    table: &SignalTable,
    tables: &CweTables,
    cwes: &[CweId],
) -> Result<(Vec<GeneratedProperty>, Vec<String>), AgentError> {
    if cwes.is_empty() {
        return Err(AgentError::Precondition("no CWEs to generate properties for".into()));
    }
    let clock = table.clock().unwrap_or("clk").to_string();
    let signals = signal_listing(table);
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for cwe in cwes {
        let description = tables.cwes.get(&cwe.id).map(|e| e.description.clone()).unwrap_or_default();
        let reply = env.complete(
            &ChatRequest::new("property_generate")
                .var("module", &table.module_name)
                .var("cwe_id", cwe.id.to_string())
                .var("cwe_title", &cwe.title)
                .var("cwe_description", description)
                .var("clock", &clock)
                .var("reset", reset_text(table))
                .var("signals", &signals)
                .max_tokens(768),
        )?;
        if is_none_reply(&reply.text) {
            warnings.push(format!("CWE-{} skipped: the backend found no applicable property", cwe.id));
            continue;
        }
        let mut triple = parse_triple(&reply.text);
        if triple.is_none() {
            let again = env.complete(
                &ChatRequest::new("property_reformat")
                    .var("cwe_id", cwe.id.to_string())
                    .var("previous", &reply.text)
                    .var("clock", &clock)
                    .max_tokens(768),
            )?;
            triple = if is_none_reply(&again.text) { None } else { parse_triple(&again.text) };
        }
        match triple {
            Some((scenario, nl_property, sva)) => out.push(GeneratedProperty {
                cwe: cwe.clone(),
                scenario,
                nl_property,
                sva,
                status: PropertyStatus::Candidate,
            }),
            None => {
                tracing::warn!(cwe = cwe.id, "no parseable property");
                warnings.push(format!("CWE-{} skipped: reply could not be parsed", cwe.id));
            }
        }
    }
    Ok((out, warnings))
}

fn rejection_reason(diags: &[ParseDiagnostic]) -> String {
    let signal =
        diags.iter().any(|d| matches!(d.kind, DiagnosticKind::UndeclaredSignal | DiagnosticKind::UnknownMember));
    let msgs: Vec<&str> = diags.iter().map(|d| d.message.as_str()).collect();
    format!("{}: {}", if signal { "signal-consistency" } else { "syntax" }, msgs.join("; "))
}

fn accept(p: &mut GeneratedProperty, a: &SvaAssertion) {
    p.sva = print_assertion(a);
    p.status = PropertyStatus::Validated;
}

/// Syntax and signal check per candidate, with one repair attempt.
/// Returns every candidate with its final status.
pub fn self_reflect(env: &AgentEnv, table: &SignalTable, candidates: Vec<GeneratedProperty>) -> Vec<GeneratedProperty> {
    let signals = signal_listing(table);
    let mut out = Vec::with_capacity(candidates.len());
    for mut p in candidates {
        let diags = match check_sva(&p.sva, table) {
            Ok(a) => {
                accept(&mut p, &a);
                out.push(p);
                continue;
            }
            Err(d) => d,
        };
        let errors: String = diags.iter().map(|d| format!("{}\n", d.render("property.sva"))).collect();
        let repair = env.complete(
            &ChatRequest::new("property_repair")
                .var("module", &table.module_name)
                .var("property", &p.nl_property)
                .var("sva", &p.sva)
                .var("errors", errors)
                .var("signals", &signals)
                .max_tokens(512),
        );
        p.status = match repair {
            Err(e) => PropertyStatus::Rejected { reason: format!("{}; repair failed: {e}", rejection_reason(&diags)) },
            Ok(r) => match sva_text(&r.text) {
                None => PropertyStatus::Rejected { reason: rejection_reason(&diags) },
                Some(fixed) => match check_sva(&fixed, table) {
                    Ok(a) => {
                        accept(&mut p, &a);
                        out.push(p);
                        continue;
                    }
                    Err(d2) => {
                        p.sva = fixed;
                        PropertyStatus::Rejected { reason: rejection_reason(&d2) }
                    }
                },
            },
        };
        out.push(p);
    }
    out
}

/// `.sva` text for the validated properties, each with a comment header.
pub fn render_sva_file(design: &str, properties: &[GeneratedProperty]) -> String {
    let mut s = format!("// Security assertions for {design}\n\n");
    for p in properties.iter().filter(|p| p.is_validated()) {
        let _ = writeln!(s, "// CWE-{}: {}", p.cwe.id, p.cwe.title);
        let _ = writeln!(s, "// Property: {}", p.nl_property.replace('\n', " "));
        let _ = writeln!(s, "{}\n", p.sva);
    }
    s
}

/// Parses an emitted `.sva` file back into assertions.
pub fn reparse_sva_file(text: &str, table: &SignalTable) -> Result<Vec<SvaAssertion>, Vec<ParseDiagnostic>> {
    let r = check_sva_file(text, Some(table), SvaOptions::default());
    if r.diagnostics.is_empty() {
        Ok(r.assertions)
    } else {
        Err(r.diagnostics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub design: String,
    pub classification: DesignClassification,
    pub design_cwes: Vec<CweId>,
    pub threat_vectors: Vec<String>,
    pub threat_cwes: Vec<CweId>,
    pub unknown_threat_vectors: Vec<String>,
    pub selection: CweSelection,
    pub properties: Vec<GeneratedProperty>,
    pub warnings: Vec<String>,
}
