//! Session-level request handling: the conversation loop that connects
//! the supervisor, the orchestrator, the agents and the store.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use svw_agents::{chat, design_name, AgentEnv, AgentRunner, Resources};
use svw_core::{
    resolve_follow_up, AgentKind, ArtifactKind, ArtifactRef, Author, Clock, CoreError, ExecutionState, FollowUp,
    InputValue, IntentResolution, PlanStatus, Requirement, RequirementKind, Session, SessionConfig, SessionStore,
    TaskContext, TaskPlan, Turn,
};
use svw_llm::Gateway;

use crate::error::EngineError;
use crate::events::{ApiMessage, EventSink};
use crate::orchestrator::{resolve_inputs, Limits, Orchestrator, RunOutcome};
use crate::outputs;
use crate::supervisor::{self, Validation};

/// Words that abandon a suspended plan or an unfinished request.
const CANCEL_WORDS: &[&str] = &["cancel", "abort", "stop"];
/// Turns of history given to the query optimizer.
const DIALOGUE_TURNS: usize = 6;

/// How a request ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Answer { agent: Option<AgentKind>, text: String, artifacts: Vec<ArtifactRef> },
    NeedsInput { plan_id: Option<String>, requirements: Vec<Requirement> },
    Failed { step: String, error: String },
}

pub struct Workbench {
    store: SessionStore,
    gateway: Arc<Gateway>,
    resources: Resources,
    clock: Arc<dyn Clock>,
    limits: Limits,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// Picks an artifact kind from the file name and, for JSON, its content.
pub fn infer_kind(filename: &str, bytes: &[u8]) -> ArtifactKind {
    let lower = filename.to_ascii_lowercase();
    let ext = lower.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    let stem = lower.rsplit_once('.').map(|(s, _)| s).unwrap_or(&lower);
    let is_tb = stem.ends_with("_tb") || stem.starts_with("tb_") || stem.contains("testbench");
    match ext {
        "v" | "sv" | "vh" | "svh" | "vhd" | "vhdl" if is_tb => ArtifactKind::Testbench,
        "v" | "sv" | "vh" | "svh" | "vhd" | "vhdl" => ArtifactKind::RtlDesign,
        "sva" => ArtifactKind::SvaFile,
        "log" | "vcd" => ArtifactKind::TraceLog,
        "json" => {
            let text = String::from_utf8_lossy(bytes);
            if text.contains("\"bug description\"") {
                ArtifactKind::BugReport
            } else if lower.contains("asset")
                || text.contains("\"security_objective\"")
                || text.contains("\"Security Objective\"")
            {
                ArtifactKind::AssetJson
            } else if lower.contains("test_plan") {
                ArtifactKind::TestPlan
            } else {
                ArtifactKind::Report
            }
        }
        _ if lower.contains("bug") => ArtifactKind::BugReport,
        _ => ArtifactKind::SpecDocument,
    }
}

/// `base` with the fields of the JSON object `patch` replaced. Unknown
/// fields and ill-typed values are configuration errors.
pub fn patch_config(base: &SessionConfig, patch: &Value) -> Result<SessionConfig, CoreError> {
    let Value::Object(fields) = patch else {
        return Err(CoreError::Config("configuration must be a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).expect("config serializes");
    for (k, v) in fields {
        if merged.get(k).is_none() {
            return Err(CoreError::Config(format!("unknown configuration field {k:?}")));
        }
        merged[k] = v.clone();
    }
    serde_json::from_value(merged).map_err(|e| CoreError::Config(format!("invalid configuration: {e}")))
}

/// Reads answers for `pending` out of a free-form message: a JSON object,
/// `name: value` lines, one line per requirement in order, or the whole
/// text when a single requirement is pending.
pub fn parse_answers(text: &str, pending: &[Requirement]) -> BTreeMap<String, String> {
    let text = text.trim();
    let mut out = BTreeMap::new();
    if text.is_empty() {
        return out;
    }
    if let Ok(Value::Object(m)) = serde_json::from_str::<Value>(text) {
        for r in pending {
            match m.get(&r.name) {
                Some(Value::String(s)) => {
                    out.insert(r.name.clone(), s.clone());
                }
                Some(v) if !v.is_null() => {
                    out.insert(r.name.clone(), v.to_string());
                }
                _ => {}
            }
        }
        return out;
    }
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    for l in &lines {
        if let Some((k, v)) = l.split_once(':') {
            let k = k.trim().trim_start_matches(['-', '*']).trim();
            if let Some(r) = pending.iter().find(|r| r.name.eq_ignore_ascii_case(k)) {
                out.insert(r.name.clone(), v.trim().to_string());
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    if pending.len() == 1 {
        out.insert(pending[0].name.clone(), text.to_string());
    } else if lines.len() == pending.len() {
        for (r, l) in pending.iter().zip(&lines) {
            let l = l.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')').trim();
            out.insert(r.name.clone(), l.to_string());
        }
    }
    out
}

fn requirements_prompt(reqs: &[Requirement]) -> String {
    let mut s = String::from("To continue I need:\n");
    for r in reqs {
        match r.kind {
            RequirementKind::Artifact(k) => {
                s.push_str(&format!("- {} (upload a {k} file): {}\n", r.name, r.description))
            }
            RequirementKind::Text => s.push_str(&format!("- {}: {}\n", r.name, r.description)),
        }
    }
    s
}

fn dialogue_state(session: &Session) -> String {
    let start = session.transcript.len().saturating_sub(DIALOGUE_TURNS);
    session.transcript[start..]
        .iter()
        .map(|t| format!("{}: {}", t.author, t.content.replace('\n', " ")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_cancel(text: &str) -> bool {
    let t = text.trim().trim_end_matches(['.', '!']).to_ascii_lowercase();
    CANCEL_WORDS.contains(&t.as_str())
}

impl Workbench {
    pub fn new(store: SessionStore, gateway: Arc<Gateway>, resources: Resources, clock: Arc<dyn Clock>) -> Self {
        Self { store, gateway, resources, clock, limits: Limits::default(), locks: Mutex::new(HashMap::new()) }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn lock(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut m = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        m.entry(session_id.to_string()).or_default().clone()
    }

    fn check_config(&self, config: &SessionConfig) -> Result<(), EngineError> {
        config.validate()?;
        if !self.gateway.has_backend(&config.backend_id) {
            return Err(CoreError::Config(format!("unknown backend {:?}", config.backend_id)).into());
        }
        Ok(())
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<Session, EngineError> {
        self.check_config(&config)?;
        Ok(self.store.create_session(config, self.clock.now())?)
    }

    pub fn session(&self, session_id: &str) -> Result<Session, EngineError> {
        Ok(self.store.load_session(session_id)?)
    }

    pub fn config(&self, session_id: &str) -> Result<SessionConfig, EngineError> {
        Ok(self.store.load_session(session_id)?.config)
    }

    /// Applies the fields present in `patch` to the session's configuration.
    pub fn update_config(&self, session_id: &str, patch: &Value) -> Result<SessionConfig, EngineError> {
        let lock = self.lock(session_id);
        let _g = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.store.load_session(session_id)?;
        let config = patch_config(&session.config, patch)?;
        self.check_config(&config)?;
        self.store.update_config(&mut session, config.clone())?;
        Ok(config)
    }

    pub fn upload(&self, filename: &str, bytes: &[u8], kind: Option<ArtifactKind>) -> Result<ArtifactRef, EngineError> {
        let kind = kind.unwrap_or_else(|| infer_kind(filename, bytes));
        Ok(self.store.put_artifact(kind, filename, bytes)?)
    }

    fn env(&self, session: &Session) -> AgentEnv {
        AgentEnv::new(self.gateway.clone(), &session.config)
    }

    fn append(
        &self,
        session: &mut Session,
        author: Author,
        content: &str,
        attachments: Vec<ArtifactRef>,
    ) -> Result<Turn, EngineError> {
        let turn = session.next_turn(author, content, attachments, self.clock.now());
        self.store.append_turn(session, turn.clone())?;
        Ok(turn)
    }

    fn ask(
        &self,
        session: &mut Session,
        plan_id: Option<String>,
        requirements: Vec<Requirement>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        self.append(session, Author::System, &requirements_prompt(&requirements), vec![])?;
        sink.emit(ApiMessage::NeedsInput {
            session_id: session.session_id.clone(),
            plan_id: plan_id.clone(),
            requirements: requirements.clone(),
        });
        Ok(Reply::NeedsInput { plan_id, requirements })
    }

    /// Handles one user message end to end.
    pub fn handle_message(
        &self,
        session_id: &str,
        text: &str,
        attachment_ids: &[String],
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        let lock = self.lock(session_id);
        let _g = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.store.load_session(session_id)?;
        let attachments = attachment_ids.iter().map(|id| self.store.artifact(id)).collect::<Result<Vec<_>, _>>()?;
        if text.trim().is_empty() && attachments.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let turn = self.append(&mut session, Author::User, text, attachments.clone())?;
        sink.emit(ApiMessage::UserMessage {
            session_id: session_id.into(),
            turn_index: turn.index,
            content: text.into(),
            attachments: attachments.clone(),
        });

        if let Some(plan_id) = session.short_term.active_plan.clone() {
            let state = self.store.load_execution(session_id, &plan_id)?;
            if state.status == PlanStatus::Suspended {
                if is_cancel(text) {
                    return self.cancel(&mut session, sink);
                }
                let pending = state.pending_requirements().unwrap_or_default().to_vec();
                let supplied = parse_answers(text, &pending);
                return self.resume_with(&mut session, state, supplied, sink);
            }
            session.short_term.active_plan = None;
        }

        if let Some(intent) = session.short_term.intent.clone() {
            if !session.short_term.pending_requirements.is_empty() {
                if is_cancel(text) {
                    return self.cancel(&mut session, sink);
                }
                let before = session.short_term.gathered_inputs.len();
                self.gather_refinement(&mut session.short_term, &intent, text, &attachments);
                if session.short_term.gathered_inputs.len() > before {
                    return self.validate_and_run(&mut session, intent, sink);
                }
                tracing::debug!("message supplies none of the pending inputs; treating it as a new request");
            }
        }
        session.short_term = TaskContext::default();

        let intent = self.classify(&session, text, &attachments)?;
        if !intent.in_domain {
            let refusal = supervisor::reject_off_domain(text);
            let t = self.append(&mut session, Author::System, refusal, vec![])?;
            self.store.save_context(&session)?;
            sink.emit(ApiMessage::Answer {
                session_id: session_id.into(),
                turn_index: t.index,
                agent: None,
                text: refusal.into(),
                citations: vec![],
                artifacts: vec![],
                follow_ups: vec![],
            });
            return Ok(Reply::Answer { agent: None, text: refusal.into(), artifacts: vec![] });
        }
        session.short_term.task_id = Some(svw_core::new_id());
        session.short_term.intent = Some(intent.clone());
        supervisor::gather_from_request(&mut session.short_term, &intent, text, &attachments);
        self.validate_and_run(&mut session, intent, sink)
    }

    /// Classification with the orchestrator's retry budget.
    fn classify(
        &self,
        session: &Session,
        text: &str,
        attachments: &[ArtifactRef],
    ) -> Result<IntentResolution, EngineError> {
        let mut failures = 0;
        loop {
            match supervisor::detect_intent(&self.gateway, &session.config.backend_id, text, attachments) {
                Err(e) if e.is_retryable() && failures < self.limits.retries => {
                    tracing::warn!(error = %e, "intent detection failed; retrying");
                    failures += 1;
                }
                r => return r,
            }
        }
    }

    fn gather_refinement(
        &self,
        ctx: &mut TaskContext,
        intent: &IntentResolution,
        text: &str,
        attachments: &[ArtifactRef],
    ) {
        let reqs = svw_agents::requirements(intent.primary());
        let pending: Vec<Requirement> =
            reqs.iter().filter(|r| ctx.pending_requirements.contains(&r.name)).cloned().collect();
        for r in &pending {
            if let RequirementKind::Artifact(k) = r.kind {
                if let Some(a) = attachments.iter().find(|a| a.kind == k) {
                    ctx.gather(r.name.clone(), InputValue::Artifact(a.clone()));
                }
            }
        }
        let text_reqs: Vec<Requirement> = pending.into_iter().filter(|r| r.kind == RequirementKind::Text).collect();
        for (name, value) in parse_answers(text, &text_reqs) {
            ctx.gather(name, InputValue::Text(value));
        }
    }

    fn validate_and_run(
        &self,
        session: &mut Session,
        intent: IntentResolution,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        match supervisor::validate_context(&intent, &session.short_term) {
            Validation::NeedsInput(missing) => {
                session.short_term.set_pending(missing.iter().map(|r| r.name.clone()));
                self.store.save_context(session)?;
                self.ask(session, None, missing, sink)
            }
            Validation::Complete(mut inputs) => {
                session.short_term.pending_requirements.clear();
                if intent.primary() == AgentKind::SecurityQa {
                    self.add_dialogue_inputs(session, &mut inputs);
                }
                let plan = supervisor::build_plan(&intent, inputs)?;
                self.run_plan(session, plan, intent.secondary(), sink)
            }
        }
    }

    /// Earlier answer and dialogue history for the Q&A agent.
    fn add_dialogue_inputs(&self, session: &Session, inputs: &mut BTreeMap<String, InputValue>) {
        // the user turn just appended is not part of the history
        let history = &session.transcript[..session.transcript.len().saturating_sub(1)];
        let last_answer = history.iter().rposition(|t| t.author == Author::Agent(AgentKind::SecurityQa));
        let Some(answer_idx) = last_answer else {
            return;
        };
        let query = inputs.get("query").and_then(InputValue::as_text).unwrap_or_default().to_string();
        let anchor = match resolve_follow_up(session, &query, &self.gateway) {
            Ok(FollowUp::FollowUp { anchor_turn_index }) => Some(anchor_turn_index),
            Ok(FollowUp::Fresh) => None,
            Err(e) => {
                tracing::warn!(error = %e, "follow-up resolution failed; using the latest answer");
                Some(answer_idx)
            }
        };
        let Some(anchor) = anchor else {
            inputs.insert("dialogue_state".into(), InputValue::Text(dialogue_state(session)));
            return;
        };
        // an anchor on a user turn refers to the answer that followed it
        let answer = history[anchor.min(history.len() - 1)..]
            .iter()
            .find(|t| t.author == Author::Agent(AgentKind::SecurityQa))
            .unwrap_or(&history[answer_idx]);
        let previous_query = history[..answer.index].iter().rev().find(|t| t.author == Author::User);
        inputs.insert("previous_answer".into(), InputValue::Text(answer.content.clone()));
        if let Some(q) = previous_query {
            inputs.insert("previous_query".into(), InputValue::Text(q.content.clone()));
        }
        inputs.insert("dialogue_state".into(), InputValue::Text(dialogue_state(session)));
    }

    fn cancel(&self, session: &mut Session, sink: &mut dyn EventSink) -> Result<Reply, EngineError> {
        session.short_term = TaskContext::default();
        self.store.save_context(session)?;
        let text = "Cancelled the pending task.";
        let t = self.append(session, Author::System, text, vec![])?;
        sink.emit(ApiMessage::Answer {
            session_id: session.session_id.clone(),
            turn_index: t.index,
            agent: None,
            text: text.into(),
            citations: vec![],
            artifacts: vec![],
            follow_ups: vec![],
        });
        Ok(Reply::Answer { agent: None, text: text.into(), artifacts: vec![] })
    }

    /// Builds and runs a plan for `agent` directly, bypassing intent
    /// detection. Used by the command-line verbs.
    pub fn run_agent(
        &self,
        session_id: &str,
        agent: AgentKind,
        inputs: BTreeMap<String, InputValue>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        let lock = self.lock(session_id);
        let _g = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.store.load_session(session_id)?;
        let intent = IntentResolution {
            categories: vec![agent],
            mode: svw_core::IntentMode::Task,
            detected_artifacts: vec![],
            mentioned_vulnerabilities: vec![],
            in_domain: true,
        };
        let mut ctx =
            TaskContext { task_id: Some(svw_core::new_id()), intent: Some(intent.clone()), ..TaskContext::default() };
        for (k, v) in inputs {
            ctx.gather(k, v);
        }
        session.short_term = ctx;
        let summary = format!("Run {agent} on {}", {
            let names: Vec<String> = session.short_term.gathered_inputs.keys().cloned().collect();
            names.join(", ")
        });
        self.append(&mut session, Author::User, &summary, vec![])?;
        self.validate_and_run(&mut session, intent, sink)
    }

    /// Supplies answers to the session's suspended plan.
    pub fn answer_pending(
        &self,
        session_id: &str,
        answers: BTreeMap<String, String>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        let lock = self.lock(session_id);
        let _g = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.store.load_session(session_id)?;
        let plan_id = session
            .short_term
            .active_plan
            .clone()
            .ok_or_else(|| EngineError::Plan("no suspended plan in this session".into()))?;
        let state = self.store.load_execution(session_id, &plan_id)?;
        let text = answers.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n");
        self.append(&mut session, Author::User, &text, vec![])?;
        self.resume_with(&mut session, state, answers, sink)
    }

    fn resume_with(
        &self,
        session: &mut Session,
        mut state: ExecutionState,
        mut supplied: BTreeMap<String, String>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        // partial answers from earlier messages are kept in short-term memory
        for (k, v) in &session.short_term.gathered_inputs {
            if let (Some(t), true) = (v.as_text(), session.short_term.pending_requirements.contains(k)) {
                supplied.entry(k.clone()).or_insert_with(|| t.to_string());
            }
        }
        let inputs = resolve_inputs(&self.store, &state.plan.inputs)?;
        let before = state.clone();
        let runner = AgentRunner { env: self.env(session), resources: &self.resources };
        let sid = session.session_id.clone();
        let outcome = {
            let mut orch = Orchestrator::new(&runner)
                .limits(self.limits)
                .checkpoint_to(&self.store, &sid)
                .on_progress(|p| sink.emit(ApiMessage::StepProgress { session_id: sid.clone(), progress: p }));
            orch.resume(&mut state, &supplied, &inputs)?
        };
        let answered = before.pending_requirements().unwrap_or_default();
        if state == before {
            // partial answer: remember what was given until the rest arrives
            for r in answered {
                if let Some(v) = supplied.get(&r.name).filter(|v| !v.trim().is_empty()) {
                    session.short_term.gathered_inputs.insert(r.name.clone(), InputValue::Text(v.clone()));
                }
            }
        } else {
            for r in answered {
                session.short_term.gathered_inputs.remove(&r.name);
            }
        }
        let secondary = session.short_term.intent.as_ref().map(|i| i.secondary()).unwrap_or_default();
        self.finish(session, &state, &inputs, outcome, secondary, sink)
    }

    fn run_plan(
        &self,
        session: &mut Session,
        plan: TaskPlan,
        secondary: Vec<AgentKind>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        let inputs = resolve_inputs(&self.store, &plan.inputs)?;
        let mut state = ExecutionState::new(plan);
        self.store.save_execution(&session.session_id, &state)?;
        session.short_term.active_plan = Some(state.plan.plan_id.clone());
        self.store.save_context(session)?;
        let runner = AgentRunner { env: self.env(session), resources: &self.resources };
        let sid = session.session_id.clone();
        let outcome = {
            let mut orch = Orchestrator::new(&runner)
                .limits(self.limits)
                .checkpoint_to(&self.store, &sid)
                .on_progress(|p| sink.emit(ApiMessage::StepProgress { session_id: sid.clone(), progress: p }));
            orch.execute(&mut state, &inputs)?
        };
        self.finish(session, &state, &inputs, outcome, secondary, sink)
    }

    fn finish(
        &self,
        session: &mut Session,
        state: &ExecutionState,
        inputs: &BTreeMap<String, svw_agents::ResolvedInput>,
        outcome: RunOutcome,
        secondary: Vec<AgentKind>,
        sink: &mut dyn EventSink,
    ) -> Result<Reply, EngineError> {
        let sid = session.session_id.clone();
        match outcome {
            RunOutcome::Suspended(requirements) => {
                session.short_term.pending_requirements =
                    state.pending_requirements().unwrap_or_default().iter().map(|r| r.name.clone()).collect();
                self.store.save_context(session)?;
                self.ask(session, Some(state.plan.plan_id.clone()), requirements, sink)
            }
            RunOutcome::Failed { step, error } => {
                session.short_term = TaskContext::default();
                self.store.save_context(session)?;
                let text = format!("The {} task failed at step {step}: {error}", state.plan.agent);
                self.append(session, Author::System, &text, vec![])?;
                sink.emit(ApiMessage::Error { session_id: Some(sid), message: text, retryable: false });
                Ok(Reply::Failed { step, error })
            }
            RunOutcome::Completed => {
                let agent = state.plan.agent;
                let rendered = outputs::render(agent, &design_name(inputs), &state.outputs)?;
                let mut artifacts = Vec::new();
                for f in &rendered.files {
                    let a = self.store.put_artifact(f.kind, &f.filename, &f.bytes)?;
                    sink.emit(ApiMessage::ArtifactReady { session_id: sid.clone(), artifact: a.clone() });
                    artifacts.push(a);
                }
                let mut text = rendered.text.clone();
                if !secondary.is_empty() {
                    let names: Vec<&str> = secondary.iter().map(|a| a.as_str()).collect();
                    text.push_str(&format!(
                        "\nThe request also touches: {}. Ask for them next if needed.\n",
                        names.join(", ")
                    ));
                }
                let t = self.append(session, Author::Agent(agent), &text, artifacts.clone())?;
                session.short_term = TaskContext {
                    last_output: Some(json!({
                        "plan_id": state.plan.plan_id,
                        "agent": agent,
                        "artifacts": artifacts,
                    })),
                    ..TaskContext::default()
                };
                self.store.save_context(session)?;
                sink.emit(ApiMessage::Answer {
                    session_id: sid,
                    turn_index: t.index,
                    agent: Some(agent),
                    text: text.clone(),
                    citations: rendered.citations,
                    artifacts: artifacts.clone(),
                    follow_ups: secondary,
                });
                Ok(Reply::Answer { agent: Some(agent), text, artifacts })
            }
        }
    }

    /// Regenerates the latest Q&A answer with the user's feedback.
    pub fn feedback(&self, session_id: &str, text: &str, sink: &mut dyn EventSink) -> Result<Reply, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let lock = self.lock(session_id);
        let _g = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.store.load_session(session_id)?;
        let answer = session
            .transcript
            .iter()
            .rev()
            .find(|t| matches!(t.author, Author::Agent(_)))
            .cloned()
            .ok_or_else(|| EngineError::Plan("there is no answer to give feedback on".into()))?;
        let query = session.transcript[..answer.index]
            .iter()
            .rev()
            .find(|t| t.author == Author::User)
            .map(|t| t.content.clone())
            .unwrap_or_default();
        let turn = self.append(&mut session, Author::User, text, vec![])?;
        sink.emit(ApiMessage::UserMessage {
            session_id: session_id.into(),
            turn_index: turn.index,
            content: text.into(),
            attachments: vec![],
        });
        let env = self.env(&session);
        let mut failures = 0;
        let a = loop {
            match chat::answer_feedback(
                &env,
                self.resources.knowledge.as_ref(),
                self.resources.web.as_deref(),
                &query,
                &answer.content,
                text,
            ) {
                Err(e) if e.is_retryable() && failures < self.limits.retries => failures += 1,
                r => break r?,
            }
        };
        let agent = AgentKind::SecurityQa;
        let t = self.append(&mut session, Author::Agent(agent), &a.answer, vec![])?;
        let citations: Vec<Value> =
            a.citations.iter().map(|c| serde_json::to_value(c).expect("citations serialize")).collect();
        sink.emit(ApiMessage::Answer {
            session_id: session_id.into(),
            turn_index: t.index,
            agent: Some(agent),
            text: a.answer.clone(),
            citations,
            artifacts: vec![],
            follow_ups: vec![],
        });
        Ok(Reply::Answer { agent: Some(agent), text: a.answer, artifacts: vec![] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_from_names() {
        assert_eq!(infer_kind("fsm.v", b""), ArtifactKind::RtlDesign);
        assert_eq!(infer_kind("fsm_tb.sv", b""), ArtifactKind::Testbench);
        assert_eq!(infer_kind("props.sva", b""), ArtifactKind::SvaFile);
        assert_eq!(infer_kind("soc.md", b""), ArtifactKind::SpecDocument);
        assert_eq!(infer_kind("bug_42.txt", b""), ArtifactKind::BugReport);
        assert_eq!(infer_kind("r.json", br#"{"bug description": "x"}"#), ArtifactKind::BugReport);
        assert_eq!(infer_kind("assets_soc.json", b"[]"), ArtifactKind::AssetJson);
        assert_eq!(infer_kind("sim.log", b""), ArtifactKind::TraceLog);
    }

    #[test]
    fn answers_from_text() {
        let reqs = vec![Requirement::text("budget", "b"), Requirement::text("timeline", "t")];
        assert!(parse_answers("  ", &reqs).is_empty());
        let a = parse_answers("Budget: $10k\ntimeline: 3 weeks", &reqs);
        assert_eq!(a["budget"], "$10k");
        assert_eq!(a["timeline"], "3 weeks");
        let a = parse_answers(r#"{"budget": "low", "timeline": 4}"#, &reqs);
        assert_eq!(a["timeline"], "4");
        let a = parse_answers("1. low\n2) a month", &reqs);
        assert_eq!(a["budget"], "low");
        assert_eq!(a["timeline"], "a month");
        let one = &reqs[..1];
        assert_eq!(parse_answers("about $5k: hardware only", one)["budget"], "about $5k: hardware only");
        assert!(parse_answers("just one line", &reqs).is_empty());
    }

    #[test]
    fn cancel_words() {
        assert!(is_cancel(" Cancel. "));
        assert!(!is_cancel("cancel the reset line check"));
    }
}
