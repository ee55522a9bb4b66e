//! Agent pipelines as named steps, and the runner the orchestrator drives.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use svw_core::{AgentKind, ArtifactKind, Requirement, RequirementKind, StepSpec};
use svw_hdl::{parse_ports, SignalTable};
use svw_knowledge::{
    ingest, Embedder, HashEmbedder, KnowledgeBase, VectorStore, WebSearch, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP,
};

use crate::assets::{self, AssetRecord, ModuleEntry, TechnicalSummary};
use crate::bugvalidate::{self, RegionOfInterest, SimulationTrace, Simulator, TestScenario, ValidationReport};
use crate::chat::{self, ChatIntent};
use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::properties::{self, CweTables, DesignClassification, GeneratedProperty, PropertyReport};
use crate::threatmodel::{
    self, DialogueRound, Flow, Infrastructure, PolicyResult, TestPlan, TestTarget, ThreatEntry, ThreatProgress,
};
use crate::vulndetect::{self, VulnFinding, VulnPattern};

/// Result of one step invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Ok(Value),
    /// Transient; the same call may succeed if repeated.
    Retryable(String),
    Fatal(String),
    /// Pause the plan until the user supplies these.
    NeedsInput(Vec<Requirement>),
    /// Re-invoke the step with this text appended to its feedback list.
    Feedback(String),
}

impl From<AgentError> for StepOutcome {
    fn from(e: AgentError) -> Self {
        if e.is_retryable() {
            StepOutcome::Retryable(e.to_string())
        } else {
            StepOutcome::Fatal(e.to_string())
        }
    }
}

/// A plan input with its text already loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedInput {
    pub filename: Option<String>,
    pub text: String,
}

impl ResolvedInput {
    pub fn text(text: impl Into<String>) -> Self {
        Self { filename: None, text: text.into() }
    }

    /// File name without its extension, if the input came from a file.
    pub fn stem(&self) -> Option<&str> {
        let f = self.filename.as_deref()?;
        Some(f.rsplit_once('.').map(|(s, _)| s).unwrap_or(f))
    }
}

/// Everything a step sees.
#[derive(Debug, Clone, Copy)]
pub struct StepCall<'a> {
    pub plan_id: &'a str,
    pub agent: AgentKind,
    pub step: &'a StepSpec,
    pub inputs: &'a BTreeMap<String, ResolvedInput>,
    pub outputs: &'a BTreeMap<String, Value>,
    pub answers: &'a BTreeMap<String, String>,
    /// Questions already put to the user, by requirement name.
    pub asked: &'a BTreeMap<String, String>,
    pub feedback: &'a [String],
    /// 1-based attempt number for this invocation.
    pub attempt: u32,
}

impl StepCall<'_> {
    fn input(&self, name: &str) -> Result<&ResolvedInput, AgentError> {
        self.inputs.get(name).ok_or_else(|| AgentError::Precondition(format!("missing input {name}")))
    }

    fn text(&self, name: &str) -> Result<&str, AgentError> {
        Ok(&self.input(name)?.text)
    }

    fn output<T: DeserializeOwned>(&self, name: &str) -> Result<T, AgentError> {
        let v = self.outputs.get(name).ok_or_else(|| AgentError::Precondition(format!("missing output {name}")))?;
        serde_json::from_value(v.clone())
            .map_err(|e| AgentError::Precondition(format!("output {name} has the wrong shape: {e}")))
    }
}

pub trait StepRunner: Send + Sync {
    fn run(&self, call: &StepCall<'_>) -> StepOutcome;
}

/// Canonical step list of each agent.
pub fn pipeline(agent: AgentKind) -> Vec<StepSpec> {
    let s = StepSpec::new;
    match agent {
        AgentKind::SecurityQa => vec![s("answer", &["query"], "answer")],
        AgentKind::AssetIdentification => vec![
            s("extract_hierarchy", &["spec_document"], "hierarchy"),
            s("summarize_modules", &["spec_document", "hierarchy"], "summaries"),
            s("generate_assets", &["summaries"], "candidates"),
            s("critique_assets", &["candidates", "summaries"], "assets"),
        ],
        AgentKind::ThreatModeling => vec![
            s("select_flow", &["spec_document", "asset_json"], "flow"),
            s("identify_threats", &["spec_document", "flow"], "threats"),
            s("generate_policies", &["spec_document", "asset_json", "flow"], "policies"),
            s("generate_test_plan", &["threats", "policies"], "test_plan"),
        ],
        AgentKind::VulnerabilityDetection => vec![
            s("scan_design", &["rtl_design"], "patterns"),
            s("analyze", &["rtl_design", "patterns"], "findings"),
            s("report", &["rtl_design", "findings"], "vuln_report"),
        ],
        AgentKind::BugValidation => vec![
            s("scenario_generation", &["rtl_design", "bug_report"], "scenario"),
            s("testbench_generation", &["rtl_design", "scenario"], "testbench"),
            s("simulate", &["rtl_design", "testbench"], "trace"),
            s("validate", &["trace", "scenario", "rtl_design"], "verdict"),
        ],
        AgentKind::PropertyGeneration => vec![
            s("classify_design", &["rtl_design"], "classification"),
            s("map_cwe", &["classification", "threat_vectors"], "cwes"),
            s("generate_properties", &["rtl_design", "cwes"], "candidates"),
            s("self_reflect", &["rtl_design", "candidates"], "properties"),
        ],
    }
}

/// Inputs each agent needs before a plan can be built, in declaration order.
pub fn requirements(agent: AgentKind) -> Vec<Requirement> {
    let art = |n: &str, k: ArtifactKind, d: &str| Requirement::new(n, RequirementKind::Artifact(k), d);
    match agent {
        AgentKind::SecurityQa => vec![Requirement::text("query", "The question to answer.")],
        AgentKind::AssetIdentification => {
            vec![art("spec_document", ArtifactKind::SpecDocument, "The SoC hardware specification document.")]
        }
        AgentKind::ThreatModeling => vec![
            art("spec_document", ArtifactKind::SpecDocument, "The SoC hardware specification document."),
            art(
                "asset_json",
                ArtifactKind::AssetJson,
                "The identified security assets (JSON from asset identification).",
            ),
        ],
        AgentKind::VulnerabilityDetection => {
            vec![art("rtl_design", ArtifactKind::RtlDesign, "The RTL design to analyze.")]
        }
        AgentKind::BugValidation => vec![
            art("rtl_design", ArtifactKind::RtlDesign, "The RTL design containing the suspected bug."),
            art(
                "bug_report",
                ArtifactKind::BugReport,
                "A description of the suspected bug (text or a vulnerability report).",
            ),
        ],
        AgentKind::PropertyGeneration => vec![
            art("rtl_design", ArtifactKind::RtlDesign, "The RTL design to generate properties for."),
            Requirement::text(
                "threat_vectors",
                "Threat vectors of concern, one per line (for example \"Improper Access Control\").",
            ),
        ],
    }
}

/// Long-lived data shared by all plans.
pub struct Resources {
    pub knowledge: Option<KnowledgeBase>,
    pub web: Option<Box<dyn WebSearch>>,
    pub embedder: Box<dyn Embedder>,
    pub threat_store: VectorStore,
    pub exemplars: String,
    pub catalog: Vec<VulnPattern>,
    pub cwe_tables: CweTables,
    pub simulator: Box<dyn Simulator>,
    /// Scratch root for simulations; each plan gets a subdirectory.
    pub work_dir: PathBuf,
    pub roi_window_ns: u64,
}

impl Resources {
    /// Bundled tables, the reference embedder and no knowledge base.
    pub fn bundled(simulator: Box<dyn Simulator>, work_dir: PathBuf) -> Self {
        let embedder = HashEmbedder::default();
        let threats = threatmodel::parse_threat_kb(threatmodel::THREAT_KB).expect("bundled threat KB parses");
        let threat_store = threatmodel::build_threat_store(&threats, &embedder).expect("threat store builds");
        Self {
            knowledge: None,
            web: None,
            embedder: Box::new(embedder),
            threat_store,
            exemplars: assets::EXEMPLARS.to_string(),
            catalog: vulndetect::builtin_catalog(),
            cwe_tables: CweTables::builtin(),
            simulator,
            work_dir,
            roi_window_ns: 0,
        }
    }

    /// Knowledge store holding the instruction-set manual, if one is loaded.
    pub fn isa_store(&self) -> Option<&VectorStore> {
        self.knowledge.as_ref()?.stores().iter().find(|s| s.store_id.contains("isa"))
    }
}

pub struct AgentRunner<'a> {
    pub env: AgentEnv,
    pub resources: &'a Resources,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("step outputs serialize")
}

fn spec_store(text: &str, embedder: &dyn Embedder) -> Result<VectorStore, AgentError> {
    let chunks = ingest(text, "spec", DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP)?;
    Ok(VectorStore::build("spec", "specification", chunks, embedder)?)
}

const CONTEXT_WORDS: usize = 600;

/// Leading part of the specification, used as the design context.
fn design_context(spec: &str) -> String {
    let words: Vec<&str> = spec.split_whitespace().take(CONTEXT_WORDS).collect();
    words.join(" ")
}

fn design_table(call: &StepCall<'_>) -> Result<SignalTable, AgentError> {
    Ok(parse_ports(call.text("rtl_design")?)?)
}

/// Design name: the module name of the parsed design.
pub fn design_name(call_inputs: &BTreeMap<String, ResolvedInput>) -> String {
    let Some(rtl) = call_inputs.get("rtl_design") else {
        return call_inputs
            .get("spec_document")
            .and_then(|s| s.stem().map(str::to_string))
            .unwrap_or_else(|| "design".into());
    };
    parse_ports(&rtl.text)
        .map(|t| t.module_name)
        .ok()
        .or_else(|| rtl.stem().map(str::to_string))
        .unwrap_or_else(|| "design".into())
}

/// The bug description: the `bug description` field of a vulnerability
/// report, or the text as given.
pub fn bug_text(report: &str) -> String {
    serde_json::from_str::<Value>(report)
        .ok()
        .and_then(|v| v.get("bug description").and_then(Value::as_str).map(str::to_string))
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| report.trim().to_string())
}

/// Earlier rounds rebuilt from the questions already asked and answered.
fn recorded_rounds(asked: &BTreeMap<String, String>, answers: &BTreeMap<String, String>) -> Vec<DialogueRound> {
    let mut rounds = Vec::new();
    for r in 0.. {
        let mut round = DialogueRound { questions: vec![], answers: vec![] };
        for i in 0.. {
            let name = threatmodel::question_name(r, i);
            let (Some(q), Some(a)) = (asked.get(&name), answers.get(&name)) else {
                break;
            };
            round.questions.push(q.clone());
            round.answers.push(a.clone());
        }
        if round.questions.is_empty() {
            break;
        }
        rounds.push(round);
    }
    rounds
}

impl AgentRunner<'_> {
    fn answer(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let query = call.text("query")?;
        let previous = call.inputs.get("previous_answer").map(|p| p.text.as_str());
        let kb = self.resources.knowledge.as_ref();
        let web = self.resources.web.as_deref();
        let intent = chat::resolve_chat_intent(&self.env, query, previous)?;
        let out = match intent {
            ChatIntent::Invalid => json!({"intent": intent, "answer": chat::INVALID_CHAT_REPLY, "citations": []}),
            ChatIntent::Feedback => {
                let original = call.inputs.get("previous_query").map(|p| p.text.as_str()).unwrap_or(query);
                let a = chat::answer_feedback(&self.env, kb, web, original, previous.unwrap_or(""), query)?;
                let mut v = to_value(&a);
                v["intent"] = to_value(&intent);
                v
            }
            ChatIntent::SecurityQuestion => {
                let state = call.inputs.get("dialogue_state").map(|d| d.text.as_str()).unwrap_or("");
                let q = chat::optimize_query(&self.env, query, state)?;
                let a = chat::answer(&self.env, kb, web, &q)?;
                let mut v = to_value(&a);
                v["intent"] = to_value(&intent);
                v["optimized_query"] = to_value(&q);
                v
            }
        };
        Ok(out)
    }

    fn extract_hierarchy(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let spec = call.text("spec_document")?;
        let store = spec_store(spec, self.resources.embedder.as_ref())?;
        Ok(to_value(&assets::extract_hierarchy(&self.env, spec, &store)?))
    }

    fn summarize_modules(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let store = spec_store(call.text("spec_document")?, self.resources.embedder.as_ref())?;
        let hierarchy: Vec<ModuleEntry> = call.output("hierarchy")?;
        let mut out = Vec::new();
        for e in hierarchy.iter().filter(|e| !e.kind.is_pruned()) {
            out.push(assets::summarize_module(&self.env, e, &store, self.resources.embedder.as_ref())?);
        }
        Ok(to_value(&out))
    }

    fn generate_assets(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let summaries: Vec<TechnicalSummary> = call.output("summaries")?;
        let mut out: Vec<Vec<AssetRecord>> = Vec::new();
        for s in &summaries {
            out.push(assets::generate_assets(&self.env, s, &self.resources.exemplars)?);
        }
        Ok(to_value(&out))
    }

    fn critique_assets(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let summaries: Vec<TechnicalSummary> = call.output("summaries")?;
        let candidates: Vec<Vec<AssetRecord>> = call.output("candidates")?;
        let mut out = Vec::new();
        for (s, c) in summaries.iter().zip(&candidates) {
            out.extend(assets::critique_assets(&self.env, c, s));
        }
        Ok(to_value(&out))
    }

    fn asset_records(call: &StepCall<'_>) -> Result<Vec<AssetRecord>, AgentError> {
        assets::parse_assets_json(call.text("asset_json")?)
            .map_err(|e| AgentError::Precondition(format!("asset_json does not match the asset schema: {e}")))
    }

    fn select_flow(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let context = design_context(call.text("spec_document")?);
        let flow = threatmodel::select_flow(&self.env, &context, &Self::asset_records(call)?)?;
        Ok(to_value(&flow))
    }

    fn identify_threats(&self, call: &StepCall<'_>) -> Result<StepOutcome, AgentError> {
        let flow: Flow = call.output("flow")?;
        if !flow.runs_flow1() {
            return Ok(StepOutcome::Ok(json!([])));
        }
        let context = design_context(call.text("spec_document")?);
        let mut rounds = recorded_rounds(call.asked, call.answers);
        loop {
            let progress = threatmodel::identify_threats(
                &self.env,
                &self.resources.threat_store,
                self.resources.embedder.as_ref(),
                &context,
                &rounds,
            )?;
            match progress {
                ThreatProgress::Done { threats } => return Ok(StepOutcome::Ok(to_value(&threats))),
                ThreatProgress::Questions { round, questions } => {
                    let names: Vec<String> =
                        (0..questions.len()).map(|i| threatmodel::question_name(round, i)).collect();
                    if names.iter().all(|n| call.answers.contains_key(n)) {
                        let answers = names.iter().map(|n| call.answers[n].clone()).collect();
                        rounds.push(DialogueRound { questions, answers });
                        continue;
                    }
                    return Ok(StepOutcome::NeedsInput(threatmodel::question_requirements(round, &questions)));
                }
            }
        }
    }

    fn generate_policies(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let flow: Flow = call.output("flow")?;
        if !flow.runs_flow2() {
            return Ok(to_value(&PolicyResult::default()));
        }
        let store = spec_store(call.text("spec_document")?, self.resources.embedder.as_ref())?;
        let r = threatmodel::generate_policies(
            &self.env,
            &store,
            self.resources.isa_store(),
            self.resources.embedder.as_ref(),
            &Self::asset_records(call)?,
        )?;
        Ok(to_value(&r))
    }

    fn generate_test_plan(&self, call: &StepCall<'_>) -> Result<StepOutcome, AgentError> {
        let threats: Vec<ThreatEntry> = call.output("threats")?;
        let policies: PolicyResult = call.output("policies")?;
        let targets: Vec<TestTarget> = threats
            .iter()
            .filter(|t| t.relevance == threatmodel::Relevance::Confirmed)
            .map(TestTarget::from_threat)
            .chain(policies.policies.iter().map(TestTarget::from_policy))
            .collect();
        let design = design_name(call.inputs);
        if targets.is_empty() {
            return Ok(StepOutcome::Ok(to_value(&TestPlan { design, infrastructure: None, test_cases: vec![] })));
        }
        let Some(infra) = Infrastructure::from_answers(call.answers) else {
            let missing =
                Infrastructure::requirements().into_iter().filter(|r| !call.answers.contains_key(&r.name)).collect();
            return Ok(StepOutcome::NeedsInput(missing));
        };
        let cases = threatmodel::generate_test_plan(&self.env, &targets, &infra)?;
        Ok(StepOutcome::Ok(to_value(&TestPlan { design, infrastructure: Some(infra), test_cases: cases })))
    }

    fn scan_design(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        Ok(to_value(&vulndetect::select_patterns(&self.resources.catalog, call.text("rtl_design")?)?))
    }

    fn analyze(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let design = call.text("rtl_design")?;
        let patterns: Vec<VulnPattern> = call.output("patterns")?;
        let mut out = Vec::new();
        for p in &patterns {
            out.push(vulndetect::analyze(&self.env, design, p)?);
        }
        Ok(to_value(&out))
    }

    fn report(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let findings: Vec<VulnFinding> = call.output("findings")?;
        Ok(to_value(&vulndetect::report(
            &design_name(call.inputs),
            &self.env.backend_id,
            &self.resources.catalog,
            findings,
        )))
    }

    fn scenario_generation(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        let bug = bug_text(call.text("bug_report")?);
        Ok(to_value(&bugvalidate::generate_scenario(&self.env, &table, &bug)?))
    }

    fn testbench_generation(&self, call: &StepCall<'_>) -> Result<StepOutcome, AgentError> {
        let table = design_table(call)?;
        let scenario: TestScenario = call.output("scenario")?;
        match bugvalidate::testbench_round(&self.env, &table, &scenario, call.feedback)? {
            Ok(src) => Ok(StepOutcome::Ok(Value::String(src))),
            Err(problems) if call.feedback.len() + 1 >= bugvalidate::TESTBENCH_ROUNDS => {
                Err(AgentError::Testbench { rounds: call.feedback.len() + 1, diagnostics: problems })
            }
            Err(problems) => Ok(StepOutcome::Feedback(problems.join("\n"))),
        }
    }

    fn simulate(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        let tb: String = call.output("testbench")?;
        let work = self.resources.work_dir.join(call.plan_id);
        let trace = self.resources.simulator.simulate(&table.module_name, call.text("rtl_design")?, &tb, &work)?;
        Ok(to_value(&trace))
    }

    fn validate(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        let trace: SimulationTrace = call.output("trace")?;
        let scenario: TestScenario = call.output("scenario")?;
        let roi: &RegionOfInterest = &scenario.roi;
        let verdict = bugvalidate::validate(&trace, roi, Some(&table), self.resources.roi_window_ns);
        let bug = call
            .inputs
            .get("bug_report")
            .and_then(|b| b.stem().map(str::to_string))
            .unwrap_or_else(|| table.module_name.clone());
        Ok(to_value(&ValidationReport {
            design: table.module_name.clone(),
            bug,
            summary: verdict.summary(),
            scenario,
            verdict,
        }))
    }

    fn classify_design(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        Ok(to_value(&properties::classify_design(&self.env, call.text("rtl_design")?, &table)?))
    }

    fn map_cwe(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let classification: DesignClassification = call.output("classification")?;
        let vectors: Vec<String> = call
            .text("threat_vectors")?
            .split(['\n', ';', ','])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let tables = &self.resources.cwe_tables;
        let design = tables.map_design(&classification);
        let (threat, unknown) = tables.map_threats(&vectors);
        let selection = properties::intersect_cwe(&design, &threat);
        Ok(json!({
            "design_cwes": design,
            "threat_vectors": vectors,
            "threat_cwes": threat,
            "unknown_threat_vectors": unknown,
            "selection": selection,
        }))
    }

    fn generate_properties(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        let cwes: Value = call.output("cwes")?;
        let selection: properties::CweSelection = serde_json::from_value(cwes["selection"].clone())
            .map_err(|e| AgentError::Precondition(format!("cwes output has the wrong shape: {e}")))?;
        let (props, warnings) =
            properties::generate_properties(&self.env, &table, &self.resources.cwe_tables, &selection.cwes)?;
        Ok(json!({ "properties": props, "warnings": warnings }))
    }

    fn self_reflect(&self, call: &StepCall<'_>) -> Result<Value, AgentError> {
        let table = design_table(call)?;
        let cands: Value = call.output("candidates")?;
        let cwes: Value = call.output("cwes")?;
        let classification: DesignClassification = call.output("classification")?;
        let shape = |e: serde_json::Error| AgentError::Precondition(format!("output has the wrong shape: {e}"));
        let list: Vec<GeneratedProperty> = serde_json::from_value(cands["properties"].clone()).map_err(shape)?;
        let mut warnings: Vec<String> = serde_json::from_value(cands["warnings"].clone()).map_err(shape)?;
        let selection: properties::CweSelection = serde_json::from_value(cwes["selection"].clone()).map_err(shape)?;
        warnings.extend(selection.warning.clone());
        let report = PropertyReport {
            design: table.module_name.clone(),
            classification,
            design_cwes: serde_json::from_value(cwes["design_cwes"].clone()).map_err(shape)?,
            threat_vectors: serde_json::from_value(cwes["threat_vectors"].clone()).map_err(shape)?,
            threat_cwes: serde_json::from_value(cwes["threat_cwes"].clone()).map_err(shape)?,
            unknown_threat_vectors: serde_json::from_value(cwes["unknown_threat_vectors"].clone()).map_err(shape)?,
            selection,
            properties: properties::self_reflect(&self.env, &table, list),
            warnings,
        };
        Ok(to_value(&report))
    }

    fn dispatch(&self, call: &StepCall<'_>) -> Result<StepOutcome, AgentError> {
        let ok = |v: Result<Value, AgentError>| v.map(StepOutcome::Ok);
        match call.step.name.as_str() {
            "answer" => ok(self.answer(call)),
            "extract_hierarchy" => ok(self.extract_hierarchy(call)),
            "summarize_modules" => ok(self.summarize_modules(call)),
            "generate_assets" => ok(self.generate_assets(call)),
            "critique_assets" => ok(self.critique_assets(call)),
            "select_flow" => ok(self.select_flow(call)),
            "identify_threats" => self.identify_threats(call),
            "generate_policies" => ok(self.generate_policies(call)),
            "generate_test_plan" => self.generate_test_plan(call),
            "scan_design" => ok(self.scan_design(call)),
            "analyze" => ok(self.analyze(call)),
            "report" => ok(self.report(call)),
            "scenario_generation" => ok(self.scenario_generation(call)),
            "testbench_generation" => self.testbench_generation(call),
            "simulate" => ok(self.simulate(call)),
            "validate" => ok(self.validate(call)),
            "classify_design" => ok(self.classify_design(call)),
            "map_cwe" => ok(self.map_cwe(call)),
            "generate_properties" => ok(self.generate_properties(call)),
            "self_reflect" => ok(self.self_reflect(call)),
            other => Ok(StepOutcome::Fatal(format!("unknown step {other}"))),
        }
    }
}

impl StepRunner for AgentRunner<'_> {
    fn run(&self, call: &StepCall<'_>) -> StepOutcome {
        match self.dispatch(call) {
            Ok(o) => o,
            Err(e) => {
                tracing::warn!(step = %call.step.name, error = %e, "step failed");
                e.into()
            }
        }
    }
}
