use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::Value;
use svw_agents::assets::{parse_assets_json, SecurityObjective};
use svw_agents::bugvalidate::{MockSimulator, ValidationReport, VerdictOutcome};
use svw_agents::properties::{render_sva_file, reparse_sva_file, PropertyReport, PropertyStatus};
use svw_agents::threatmodel::{Relevance, TestPlan, ThreatEntry};
use svw_agents::vulndetect::{VulnReport, VulnVerdict};
use svw_agents::*;
use svw_core::{AgentKind, Requirement, SessionConfig};
use svw_llm::{Gateway, MockBackend};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(rel: &str) -> String {
    let p = root().join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn file_input(rel: &str) -> ResolvedInput {
    ResolvedInput { filename: Some(rel.rsplit('/').next().unwrap().to_string()), text: fixture(rel) }
}

struct Harness {
    mock: Arc<MockBackend>,
    env: AgentEnv,
    resources: Resources,
    _work: tempfile::TempDir,
}

fn harness(mock_dir: &str, config: SessionConfig) -> Harness {
    let mock = Arc::new(MockBackend::from_dir(root().join("mock").join(mock_dir)).unwrap());
    let gateway = Arc::new(Gateway::with_builtin_templates().with_backend("mock", mock.clone()));
    let work = tempfile::tempdir().unwrap();
    let resources = Resources::bundled(Box::new(MockSimulator::new(root().join("traces"))), work.path().to_path_buf());
    Harness { mock, env: AgentEnv::new(gateway, &config), resources, _work: work }
}

enum Run {
    Done(BTreeMap<String, Value>),
    Needs(Vec<Requirement>, BTreeMap<String, String>),
}

/// Minimal sequential driver: feedback re-invokes the step, input requests
/// stop the run.
fn drive(
    h: &Harness,
    agent: AgentKind,
    inputs: &BTreeMap<String, ResolvedInput>,
    answers: &BTreeMap<String, String>,
) -> Run {
    let runner = AgentRunner { env: h.env.clone(), resources: &h.resources };
    let mut outputs = BTreeMap::new();
    let mut asked = BTreeMap::new();
    for step in pipeline(agent) {
        let mut feedback = Vec::new();
        loop {
            let call = StepCall {
                plan_id: "p1",
                agent,
                step: &step,
                inputs,
                outputs: &outputs,
                answers,
                asked: &asked,
                feedback: &feedback,
                attempt: 1,
            };
            match runner.run(&call) {
                StepOutcome::Ok(v) => {
                    outputs.insert(step.produces.clone(), v);
                    break;
                }
                StepOutcome::Feedback(f) => feedback.push(f),
                StepOutcome::NeedsInput(r) => {
                    for q in &r {
                        asked.insert(q.name.clone(), q.description.clone());
                    }
                    return Run::Needs(r, asked);
                }
                other => panic!("step {} failed: {other:?}", step.name),
            }
        }
    }
    Run::Done(outputs)
}

fn done(r: Run) -> BTreeMap<String, Value> {
    match r {
        Run::Done(o) => o,
        Run::Needs(r, _) => panic!("unexpected input request {r:?}"),
    }
}

#[test]
fn bug_validation_matches_roi_at_45() {
    let h = harness("bug_validation", SessionConfig::default());
    let inputs = BTreeMap::from([
        ("rtl_design".to_string(), file_input("designs/Authentication_Bypass.v")),
        ("bug_report".to_string(), file_input("bugs/Authentication_Bypass.txt")),
    ]);
    let out = done(drive(&h, AgentKind::BugValidation, &inputs, &BTreeMap::new()));
    let report: ValidationReport = serde_json::from_value(out["verdict"].clone()).unwrap();
    assert_eq!(report.verdict.outcome, VerdictOutcome::Match, "{}", report.summary);
    assert_eq!(report.verdict.roi_time_ns, 45);
    assert_eq!(report.verdict.record_time_ns, Some(45));
    assert_eq!(report.verdict.detail.len(), 5);
    assert!(report.verdict.detail.iter().all(|d| d.equal));
    assert_eq!(report.bug, "Authentication_Bypass");
    assert_eq!(h.mock.calls_for("testbench_generate").len(), 1);
}

#[test]
fn property_pipeline_on_uart_dma() {
    let h = harness("properties", SessionConfig::default());
    let inputs = BTreeMap::from([
        ("rtl_design".to_string(), file_input("designs/uart_dma_top.v")),
        ("threat_vectors".to_string(), ResolvedInput::text("Improper Access Control")),
    ]);
    let out = done(drive(&h, AgentKind::PropertyGeneration, &inputs, &BTreeMap::new()));
    let report: PropertyReport = serde_json::from_value(out["properties"].clone()).unwrap();
    let selected: Vec<u32> = report.selection.cwes.iter().map(|c| c.id).collect();
    assert!(selected.contains(&284) && selected.contains(&1244), "{selected:?}");
    assert!(report.warnings.iter().any(|w| w.contains("CWE-1191")));

    let table = svw_hdl::parse_ports(&fixture("designs/uart_dma_top.v")).unwrap();
    let validated: Vec<_> = report.properties.iter().filter(|p| p.is_validated()).collect();
    let cwes: Vec<u32> = validated.iter().map(|p| p.cwe.id).collect();
    assert_eq!(cwes, [284, 1244, 1262]);
    for p in &validated {
        svw_hdl::check_sva(&p.sva, &table).unwrap();
    }
    let seeded = report.properties.iter().find(|p| p.cwe.id == 1234).unwrap();
    match &seeded.status {
        PropertyStatus::Rejected { reason } => {
            assert!(reason.starts_with("signal-consistency:"), "{reason}");
            assert!(reason.contains("dbg_rd"), "{reason}");
        }
        s => panic!("seeded candidate not rejected: {s:?}"),
    }

    let file = render_sva_file(&report.design, &report.properties);
    assert!(file.contains("// CWE-1244:"));
    assert!(!file.contains("dbg_rd "));
    let back = reparse_sva_file(&file, &table).unwrap();
    assert_eq!(back.len(), 3);
    for (a, p) in back.iter().zip(&validated) {
        assert_eq!(svw_hdl::print_assertion(a), p.sva);
    }
}

#[test]
fn assets_skip_pruned_modules() {
    let h = harness("assets", SessionConfig::default());
    let inputs = BTreeMap::from([("spec_document".to_string(), file_input("specs/neorv32_mini.md"))]);
    let out = done(drive(&h, AgentKind::AssetIdentification, &inputs, &BTreeMap::new()));
    let hierarchy = out["hierarchy"].as_array().unwrap();
    assert_eq!(hierarchy.len(), 5);
    let records: Vec<svw_agents::assets::AssetRecord> = serde_json::from_value(out["assets"].clone()).unwrap();
    let ips: std::collections::BTreeSet<&str> = records.iter().map(|r| r.ip.as_str()).collect();
    assert_eq!(ips, ["neorv32_trng", "neorv32_uart", "neorv32_wdt"].into());
    // The critic dropped one uart candidate.
    assert_eq!(records.len(), 6);
    assert!(!records.iter().any(|r| r.asset_name == "UART interrupt enable"));
    for r in &records {
        assert!(matches!(
            r.security_objective,
            SecurityObjective::Confidentiality | SecurityObjective::Integrity | SecurityObjective::Availability
        ));
    }
    // No summary or generation request ever names a pruned module.
    for c in h.mock.calls_for("summarize_module").iter().chain(&h.mock.calls_for("generate_assets")) {
        assert!(!c.text.contains("of the neorv32_top") && !c.text.contains("of the neorv32_package"));
    }

    let json = svw_agents::assets::assets_json(&records);
    let v: Value = serde_json::from_str(&json).unwrap();
    for ip in v.as_array().unwrap() {
        let keys: Vec<&str> = ip.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["IP", "Assets"]);
        for a in ip["Assets"].as_array().unwrap() {
            let keys: Vec<&str> = a.as_object().unwrap().keys().map(String::as_str).collect();
            assert_eq!(keys, ["Asset_Name", "Functionality", "Security Objective", "Justification"]);
        }
    }
    assert_eq!(parse_assets_json(&json).unwrap(), records);
}

#[test]
fn threat_dialogue_suspends_and_completes() {
    let h = harness("threat", SessionConfig::default());
    let spec = file_input("specs/neorv32_mini.md");
    let assets = r#"[{"IP":"neorv32_wdt","Assets":[{"Asset_Name":"WDT CTRL LOCK bit","Functionality":"Freezes the watchdog configuration until reset.","Security Objective":"Integrity","Justification":"Clearing LOCK lets software disable the watchdog."}]}]"#;
    let inputs =
        BTreeMap::from([("spec_document".to_string(), spec), ("asset_json".to_string(), ResolvedInput::text(assets))]);
    let mut answers = BTreeMap::new();
    let Run::Needs(req, asked) = drive(&h, AgentKind::ThreatModeling, &inputs, &answers) else {
        panic!("expected questions");
    };
    let names: Vec<&str> = req.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["threat_r0_q0", "threat_r0_q1"]);
    assert_eq!(asked.len(), 2);
    answers.insert("threat_r0_q0".into(), "yes, devices are deployed in the field".into());
    answers.insert("threat_r0_q1".into(), "yes, a trusted foundry".into());

    let Run::Needs(req, _) = drive(&h, AgentKind::ThreatModeling, &inputs, &answers) else {
        panic!("expected infrastructure questions");
    };
    let names: Vec<&str> = req.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["testing_infrastructure", "budget", "timeline"]);
    answers.insert("testing_infrastructure".into(), "logic analyzer; simulator".into());
    answers.insert("budget".into(), "moderate".into());
    answers.insert("timeline".into(), "six weeks".into());

    let out = done(drive(&h, AgentKind::ThreatModeling, &inputs, &answers));
    let threats: Vec<ThreatEntry> = serde_json::from_value(out["threats"].clone()).unwrap();
    assert!(!threats.is_empty());
    for t in &threats {
        assert_ne!(t.relevance, Relevance::Candidate, "{t:?}");
        assert!(!t.rationale.is_empty());
    }
    let plan: TestPlan = serde_json::from_value(out["test_plan"].clone()).unwrap();
    let confirmed = threats.iter().filter(|t| t.relevance == Relevance::Confirmed).count();
    let policies = out["policies"]["policies"].as_array().unwrap().len();
    assert_eq!(policies, 1);
    assert_eq!(plan.test_cases.len(), confirmed + policies);
    assert_eq!(plan.test_cases[0].test_id, "TC01");
    // Tools the engineer does not have are marked.
    assert!(plan.test_cases[0].tool_recommendations.iter().any(|t| t.ends_with("(requires acquisition)")));
    assert!(plan.test_cases[0].tool_recommendations.iter().any(|t| t == "logic analyzer"));
}

#[test]
fn vulnerability_report_for_fsm() {
    let h = harness("vuln", SessionConfig::default());
    let inputs = BTreeMap::from([("rtl_design".to_string(), file_input("designs/Authentication_Bypass.v"))]);
    let out = done(drive(&h, AgentKind::VulnerabilityDetection, &inputs, &BTreeMap::new()));
    let report: VulnReport = serde_json::from_value(out["vuln_report"].clone()).unwrap();
    assert_eq!(report.design, "Authentication_Bypass");
    let vp01 = report.findings.iter().find(|f| f.pattern_id == "VP01").unwrap();
    assert_eq!(vp01.verdict, VulnVerdict::Vulnerable);
    let design = fixture("designs/Authentication_Bypass.v");
    let lines: Vec<&str> = design.lines().collect();
    for e in &vp01.evidence_lines {
        assert_eq!(e.source, lines[e.line - 1]);
    }
    assert!(vp01.evidence_lines.iter().any(|e| e.source.contains("nextState = WAIT_STATE")));
    assert!(report.bug_description.contains("FSM unsafe transition"));
    assert!(out["vuln_report"].get("bug description").is_some());

    // Same replies under a stricter threshold are reported as uncertain.
    let strict = harness("vuln", SessionConfig { confidence_threshold: 0.95, ..SessionConfig::default() });
    let out = done(drive(&strict, AgentKind::VulnerabilityDetection, &inputs, &BTreeMap::new()));
    let report: VulnReport = serde_json::from_value(out["vuln_report"].clone()).unwrap();
    assert!(report.findings.iter().all(|f| f.verdict == VulnVerdict::Uncertain));
}
