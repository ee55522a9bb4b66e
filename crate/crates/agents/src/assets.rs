//! Security asset identification from a specification document.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use svw_knowledge::{Embedder, VectorStore, SCORE_FLOOR};
use svw_llm::ChatRequest;

use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::text::{blocks, field, is_none_reply};

pub const EXEMPLARS: &str = include_str!("../data/exemplars.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Functional,
    Package,
    Glue,
    Image,
}

impl ModuleKind {
    pub fn is_pruned(self) -> bool {
        self != ModuleKind::Functional
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "functional" => Some(ModuleKind::Functional),
            "package" => Some(ModuleKind::Package),
            "glue" => Some(ModuleKind::Glue),
            "image" => Some(ModuleKind::Image),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleEntry {
    pub name: String,
    pub kind: ModuleKind,
    pub spec_sections: Vec<String>,
}

/// Name-pattern pruning: any word of the name equal to a marker.
pub fn kind_by_name(name: &str) -> Option<ModuleKind> {
    let words: Vec<String> = name
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect();
    let has = |ms: &[&str]| words.iter().any(|w| ms.contains(&w.as_str()));
    if has(&["package", "pkg"]) {
        Some(ModuleKind::Package)
    } else if has(&["image", "img"]) {
        Some(ModuleKind::Image)
    } else if has(&["top", "wrapper"]) {
        Some(ModuleKind::Glue)
    } else {
        None
    }
}

/// Rule kind wins when it prunes; the backend may demote a functional module
/// but never promote a pruned one.
fn combine_kind(rule: Option<ModuleKind>, backend: Option<ModuleKind>) -> ModuleKind {
    match (rule, backend) {
        (Some(r), _) => r,
        (None, Some(b)) => b,
        (None, None) => ModuleKind::Functional,
    }
}

/// Heading lines: Markdown `#` headings and numbered section titles.
pub fn outline(spec: &str) -> String {
    let numbered = |l: &str| {
        let mut parts = l.splitn(2, char::is_whitespace);
        let num = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("").trim();
        !rest.is_empty()
            && num.chars().next().is_some_and(|c| c.is_ascii_digit())
            && num.trim_end_matches('.').split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
    };
    spec.lines().map(str::trim).filter(|l| l.starts_with('#') || numbered(l)).collect::<Vec<_>>().join("\n")
}

fn mentions(text: &str, name: &str) -> bool {
    let n = name.to_lowercase();
    text.to_lowercase().contains(&n)
}

pub fn extract_hierarchy(env: &AgentEnv, spec: &str, store: &VectorStore) -> Result<Vec<ModuleEntry>, AgentError> {
    let outline = outline(spec);
    let outline = if outline.is_empty() { spec.to_string() } else { outline };
    let reply = env.complete(&ChatRequest::new("extract_hierarchy").var("outline", outline).max_tokens(512))?;
    let mut out: Vec<ModuleEntry> = Vec::new();
    for line in reply.text.lines() {
        let mut name = None;
        let mut kind = None;
        for part in line.split(';') {
            if let Some(v) = field(part, "module") {
                name = Some(v.to_string());
            } else if let Some(v) = field(part, "kind") {
                kind = ModuleKind::parse(v);
            }
        }
        let Some(name) = name.filter(|n| !n.is_empty()) else {
            continue;
        };
        if out.iter().any(|e| e.name == name) {
            continue;
        }
        let spec_sections =
            store.chunks().iter().filter(|c| mentions(&c.text, &name)).map(|c| c.chunk_id.clone()).collect();
        out.push(ModuleEntry { kind: combine_kind(kind_by_name(&name), kind), name, spec_sections });
    }
    if out.is_empty() {
        return Err(AgentError::EmptyHierarchy);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechnicalSummary {
    pub module: String,
    pub summary: String,
    pub cited_chunks: Vec<String>,
}

const SUMMARY_FACETS: &[&str] = &["", "registers", "flags", "configuration", "interactions"];

pub fn summarize_module(
    env: &AgentEnv,
    entry: &ModuleEntry,
    store: &VectorStore,
    embedder: &dyn Embedder,
) -> Result<TechnicalSummary, AgentError> {
    if entry.kind.is_pruned() {
        return Err(AgentError::Precondition(format!(
            "module {} is a {:?} module and is not summarized",
            entry.name, entry.kind
        )));
    }
    let mut ids: Vec<String> = Vec::new();
    // Chunks that name the module come first, then retrieval per facet.
    for id in &entry.spec_sections {
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    for facet in SUMMARY_FACETS {
        let q = format!("{} {facet}", entry.name);
        let v = embedder.embed(&q);
        if v.is_zero() {
            continue;
        }
        for h in store.search(&v, env.retrieval_k.max(1))? {
            let named = store.chunk(&h.chunk_id).is_some_and(|c| mentions(&c.text, &entry.name));
            if h.score >= SCORE_FLOOR && named && !ids.contains(&h.chunk_id) {
                ids.push(h.chunk_id);
            }
        }
    }
    ids.truncate(env.retrieval_k.max(1) * 2);
    if ids.is_empty() {
        return Err(AgentError::Summarization { module: entry.name.clone() });
    }
    let mut evidence = String::new();
    for id in &ids {
        if let Some(c) = store.chunk(id) {
            evidence.push_str(&format!("[{id}] {}\n", c.text.trim()));
        }
    }
    let reply = env.complete(
        &ChatRequest::new("summarize_module").var("module", &entry.name).var("evidence", evidence).max_tokens(768),
    )?;
    Ok(TechnicalSummary { module: entry.name.clone(), summary: reply.text.trim().to_string(), cited_chunks: ids })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecurityObjective {
    Confidentiality,
    Integrity,
    Availability,
}

impl FromStr for SecurityObjective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().trim_end_matches('.').to_ascii_lowercase().as_str() {
            "confidentiality" => Ok(SecurityObjective::Confidentiality),
            "integrity" => Ok(SecurityObjective::Integrity),
            "availability" => Ok(SecurityObjective::Availability),
            other => Err(format!("{other:?} is not a CIA objective")),
        }
    }
}

impl fmt::Display for SecurityObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub ip: String,
    pub asset_name: String,
    pub functionality: String,
    pub security_objective: SecurityObjective,
    pub justification: String,
}

fn parse_asset_block(ip: &str, block: &[&str]) -> Option<AssetRecord> {
    let get = |label: &str| block.iter().find_map(|l| field(l, label)).filter(|v| !v.is_empty());
    let rec = AssetRecord {
        ip: ip.to_string(),
        asset_name: get("asset")?.to_string(),
        functionality: get("functionality")?.to_string(),
        security_objective: get("objective")?.parse().ok()?,
        justification: get("justification")?.to_string(),
    };
    Some(rec)
}

/// Parsed records, or `None` when the reply is neither `none` nor contains a
/// single parseable block.
fn parse_assets(ip: &str, text: &str) -> Option<Vec<AssetRecord>> {
    if is_none_reply(text) {
        return Some(Vec::new());
    }
    let bs = blocks(text);
    let mut out = Vec::new();
    for b in &bs {
        match parse_asset_block(ip, b) {
            Some(r) => out.push(r),
            None => tracing::warn!(ip, block = ?b, "dropping unparseable asset block"),
        }
    }
    (!out.is_empty()).then_some(out)
}

pub fn generate_assets(
    env: &AgentEnv,
    summary: &TechnicalSummary,
    exemplars: &str,
) -> Result<Vec<AssetRecord>, AgentError> {
    if exemplars.trim().is_empty() {
        return Err(AgentError::Precondition("exemplar set is empty".into()));
    }
    let reply = env.complete(
        &ChatRequest::new("generate_assets")
            .var("module", &summary.module)
            .var("summary", &summary.summary)
            .var("exemplars", exemplars)
            .max_tokens(1024),
    )?;
    if let Some(r) = parse_assets(&summary.module, &reply.text) {
        return Ok(r);
    }
    let again = env.complete(
        &ChatRequest::new("assets_reformat")
            .var("module", &summary.module)
            .var("previous", &reply.text)
            .max_tokens(1024),
    )?;
    parse_assets(&summary.module, &again.text)
        .ok_or_else(|| AgentError::Generation(format!("asset reply for {} has no parseable records", summary.module)))
}

fn numbered_candidates(candidates: &[AssetRecord]) -> String {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            format!(
                "{}. {} ({}): {} Justification: {}\n",
                i + 1,
                c.asset_name,
                c.security_objective,
                c.functionality,
                c.justification
            )
        })
        .collect()
}

/// Second pass that drops false positives. Output keeps input order and
/// never adds records. A failed critique keeps every candidate.
pub fn critique_assets(env: &AgentEnv, candidates: &[AssetRecord], summary: &TechnicalSummary) -> Vec<AssetRecord> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let reply = match env.complete(
        &ChatRequest::new("critique_assets")
            .var("module", &summary.module)
            .var("summary", &summary.summary)
            .var("candidates", numbered_candidates(candidates))
            .max_tokens(512),
    ) {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!(module = %summary.module, error = %e, "critique failed; keeping candidates");
            return candidates.to_vec();
        }
    };
    let mut dropped = BTreeSet::new();
    for line in reply.text.lines() {
        let l = line.trim().to_ascii_lowercase();
        if let Some(rest) = l.strip_prefix("drop") {
            let num: String = rest.trim_start().chars().take_while(|c| c.is_ascii_digit()).collect();
            if let Ok(n) = num.parse::<usize>() {
                dropped.insert(n);
            }
        }
    }
    candidates.iter().enumerate().filter(|(i, _)| !dropped.contains(&(i + 1))).map(|(_, c)| c.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingAsset {
    #[serde(rename = "Asset_Name")]
    pub asset_name: String,
    #[serde(rename = "Functionality")]
    pub functionality: String,
    #[serde(rename = "Security Objective")]
    pub security_objective: SecurityObjective,
    #[serde(rename = "Justification")]
    pub justification: String,
}

/// One object per IP, in the order IPs first appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingIp {
    #[serde(rename = "IP")]
    pub ip: String,
    #[serde(rename = "Assets")]
    pub assets: Vec<ListingAsset>,
}

pub fn group_by_ip(records: &[AssetRecord]) -> Vec<ListingIp> {
    let mut out: Vec<ListingIp> = Vec::new();
    for r in records {
        let a = ListingAsset {
            asset_name: r.asset_name.clone(),
            functionality: r.functionality.clone(),
            security_objective: r.security_objective,
            justification: r.justification.clone(),
        };
        match out.iter_mut().find(|g| g.ip == r.ip) {
            Some(g) => g.assets.push(a),
            None => out.push(ListingIp { ip: r.ip.clone(), assets: vec![a] }),
        }
    }
    out
}

pub fn ungroup(groups: &[ListingIp]) -> Vec<AssetRecord> {
    groups
        .iter()
        .flat_map(|g| {
            g.assets.iter().map(|a| AssetRecord {
                ip: g.ip.clone(),
                asset_name: a.asset_name.clone(),
                functionality: a.functionality.clone(),
                security_objective: a.security_objective,
                justification: a.justification.clone(),
            })
        })
        .collect()
}

/// Pretty-printed top-level array.
pub fn assets_json(records: &[AssetRecord]) -> String {
    let mut s = serde_json::to_string_pretty(&group_by_ip(records)).expect("assets serialize");
    s.push('\n');
    s
}

/// Accepts the top-level array form and also objects concatenated without
/// an enclosing array.
pub fn parse_assets_json(text: &str) -> Result<Vec<AssetRecord>, serde_json::Error> {
    if let Ok(groups) = serde_json::from_str::<Vec<ListingIp>>(text) {
        return Ok(ungroup(&groups));
    }
    let mut groups = Vec::new();
    for g in serde_json::Deserializer::from_str(text).into_iter::<ListingIp>() {
        groups.push(g?);
    }
    Ok(ungroup(&groups))
}
