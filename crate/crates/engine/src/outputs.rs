//! Turns the outputs of a completed plan into downloadable files and a
//! short chat answer.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::de::DeserializeOwned;
use serde_json::Value;
use svw_agents::assets::{assets_json, AssetRecord};
use svw_agents::bugvalidate::ValidationReport;
use svw_agents::properties::{render_sva_file, PropertyReport, PropertyStatus};
use svw_agents::threatmodel::{test_plan_markdown, Flow, PolicyResult, Relevance, TestPlan, ThreatEntry, ThreatModel};
use svw_agents::vulndetect::{VulnReport, VulnVerdict};
use svw_core::ArtifactKind;

use crate::error::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub filename: String,
    pub kind: ArtifactKind,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    fn new(filename: String, kind: ArtifactKind, text: String) -> Self {
        Self { filename, kind, bytes: text.into_bytes() }
    }
}

/// Answer text, citations and files for a completed plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: String,
    pub citations: Vec<Value>,
    pub files: Vec<OutputFile>,
}

fn get<T: DeserializeOwned>(outputs: &BTreeMap<String, Value>, name: &str) -> Result<T, EngineError> {
    let v = outputs.get(name).ok_or_else(|| EngineError::Plan(format!("completed plan has no `{name}` output")))?;
    serde_json::from_value(v.clone())
        .map_err(|e| EngineError::Plan(format!("output `{name}` has the wrong shape: {e}")))
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

/// Lowercase label of a serde string enum.
fn label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

pub fn security_qa(outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let a: Value = get(outputs, "answer")?;
    Ok(Rendered {
        text: a["answer"].as_str().unwrap_or_default().to_string(),
        citations: a["citations"].as_array().cloned().unwrap_or_default(),
        files: vec![],
    })
}

pub fn assets(design: &str, outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let records: Vec<AssetRecord> = get(outputs, "assets")?;
    let mut text = format!("Identified {} security assets in {design}.\n", records.len());
    for r in &records {
        let _ = writeln!(text, "- {} / {}: {}", r.ip, r.asset_name, label(&r.security_objective));
    }
    Ok(Rendered {
        text,
        citations: vec![],
        files: vec![OutputFile::new(
            format!("assets_{}.json", safe(design)),
            ArtifactKind::AssetJson,
            assets_json(&records),
        )],
    })
}

pub fn threat_model(design: &str, outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let flow: Flow = get(outputs, "flow")?;
    let threats: Vec<ThreatEntry> = get(outputs, "threats")?;
    let policies: PolicyResult = get(outputs, "policies")?;
    let plan: TestPlan = get(outputs, "test_plan")?;
    let model = ThreatModel {
        design: design.to_string(),
        flow,
        threats,
        policies: policies.policies,
        uncovered_assets: policies.uncovered_assets,
    };
    let confirmed: Vec<&ThreatEntry> = model.threats.iter().filter(|t| t.relevance == Relevance::Confirmed).collect();
    let mut text = format!(
        "Threat model for {design}: {} confirmed threats, {} security policies, {} test cases.\n",
        confirmed.len(),
        model.policies.len(),
        plan.test_cases.len()
    );
    for t in &confirmed {
        let _ = writeln!(text, "- {} {}", t.threat_id, t.name);
    }
    if !model.uncovered_assets.is_empty() {
        let _ = writeln!(text, "No policy covers: {}", model.uncovered_assets.join(", "));
    }
    let d = safe(design);
    Ok(Rendered {
        text,
        citations: vec![],
        files: vec![
            OutputFile::new(format!("threat_model_{d}.json"), ArtifactKind::Report, pretty(&model)),
            OutputFile::new(format!("test_plan_{d}.json"), ArtifactKind::TestPlan, pretty(&plan)),
            OutputFile::new(format!("test_plan_{d}.md"), ArtifactKind::TestPlan, test_plan_markdown(&plan)),
        ],
    })
}

pub fn vulnerability(outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let report: VulnReport = get(outputs, "vuln_report")?;
    let vulnerable = report.findings.iter().filter(|f| f.verdict == VulnVerdict::Vulnerable).count();
    let mut text =
        format!("Analyzed {} against {} patterns: {vulnerable} vulnerable.\n", report.design, report.findings.len());
    for f in &report.findings {
        let lines: Vec<String> = f.evidence_lines.iter().map(|l| l.line.to_string()).collect();
        let _ = writeln!(
            text,
            "- {} {}: {} (confidence {:.2}{})",
            f.pattern_id,
            f.title,
            label(&f.verdict),
            f.confidence,
            if lines.is_empty() { String::new() } else { format!(", lines {}", lines.join(", ")) }
        );
    }
    if let Some(n) = &report.note {
        let _ = writeln!(text, "{n}");
    }
    Ok(Rendered {
        text,
        citations: vec![],
        files: vec![OutputFile::new(
            format!("vuln_report_{}.json", safe(&report.design)),
            ArtifactKind::BugReport,
            pretty(&report),
        )],
    })
}

pub fn bug_validation(outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let report: ValidationReport = get(outputs, "verdict")?;
    let testbench: String = get(outputs, "testbench")?;
    Ok(Rendered {
        text: format!("{}\n", report.summary),
        citations: vec![],
        files: vec![
            OutputFile::new(format!("verdict_{}.json", safe(&report.bug)), ArtifactKind::Report, pretty(&report)),
            OutputFile::new(format!("testbench_{}.v", safe(&report.design)), ArtifactKind::Testbench, testbench),
        ],
    })
}

pub fn properties(outputs: &BTreeMap<String, Value>) -> Result<Rendered, EngineError> {
    let report: PropertyReport = get(outputs, "properties")?;
    let ok: Vec<_> = report.properties.iter().filter(|p| p.is_validated()).collect();
    let mut text = format!(
        "Generated {} validated properties for {} ({} candidates).\n",
        ok.len(),
        report.design,
        report.properties.len()
    );
    for p in &report.properties {
        let status = match &p.status {
            PropertyStatus::Validated => "validated".to_string(),
            PropertyStatus::Candidate => "candidate".to_string(),
            PropertyStatus::Rejected { reason } => format!("rejected ({reason})"),
        };
        let _ = writeln!(text, "- CWE-{} {}: {status}", p.cwe.id, p.cwe.title);
    }
    for w in &report.warnings {
        let _ = writeln!(text, "Warning: {w}");
    }
    let d = safe(&report.design);
    Ok(Rendered {
        text,
        citations: vec![],
        files: vec![
            OutputFile::new(
                format!("properties_{d}.sva"),
                ArtifactKind::SvaFile,
                render_sva_file(&report.design, &report.properties),
            ),
            OutputFile::new(format!("properties_{d}.json"), ArtifactKind::Report, pretty(&report)),
        ],
    })
}

/// Dispatches on the plan's agent.
pub fn render(
    agent: svw_core::AgentKind,
    design: &str,
    outputs: &BTreeMap<String, Value>,
) -> Result<Rendered, EngineError> {
    use svw_core::AgentKind::*;
    match agent {
        SecurityQa => security_qa(outputs),
        AssetIdentification => assets(design, outputs),
        ThreatModeling => threat_model(design, outputs),
        VulnerabilityDetection => vulnerability(outputs),
        BugValidation => bug_validation(outputs),
        PropertyGeneration => properties(outputs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn names_are_path_safe() {
        assert_eq!(safe("../x y"), "___x_y");
        assert_eq!(safe("uart_dma-top"), "uart_dma-top");
    }

    #[test]
    fn missing_output_is_reported() {
        let e = render(svw_core::AgentKind::BugValidation, "d", &BTreeMap::new()).unwrap_err();
        assert!(e.to_string().contains("verdict"));
    }

    #[test]
    fn qa_answer_passes_citations() {
        let out = BTreeMap::from([(
            "answer".to_string(),
            json!({"answer": "Use a fuzzer.", "citations": [{"source": "doc#0", "quote": "q"}]}),
        )]);
        let r = render(svw_core::AgentKind::SecurityQa, "", &out).unwrap();
        assert_eq!(r.text, "Use a fuzzer.");
        assert_eq!(r.citations.len(), 1);
        assert!(r.files.is_empty());
    }
}
