//! Intent detection, contextual validation and plan building.

use std::collections::BTreeMap;

use svw_agents::{pipeline, requirements};
use svw_core::{
    new_id, AgentKind, ArtifactKind, ArtifactRef, InputValue, IntentMode, IntentResolution, Requirement,
    RequirementKind, TaskContext, TaskPlan,
};
use svw_llm::{ChatRequest, Gateway};

use crate::error::EngineError;

/// Fixed refusal for requests outside hardware security and verification.
pub const REFUSAL: &str = "I can only help with SoC security verification: hardware security questions, \
security asset identification, threat modeling and test planning, RTL vulnerability detection, \
simulation-based bug validation and security property generation. Please rephrase your request \
within that scope.";

fn field<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let (k, v) = line.split_once(':')?;
    k.trim().eq_ignore_ascii_case(label).then(|| v.trim())
}

fn first<'a>(reply: &'a str, label: &str) -> Option<&'a str> {
    reply.lines().map(|l| l.trim().trim_start_matches(['-', '*']).trim()).find_map(|l| field(l, label))
}

fn is_none(v: &str) -> bool {
    let v = v.trim().trim_end_matches('.').to_ascii_lowercase();
    v.is_empty() || v == "none" || v == "n/a"
}

/// Parses the labeled-line classification reply. Labels are matched
/// case-insensitively and the first occurrence wins.
pub fn parse_intent(reply: &str, attachments: &[ArtifactRef]) -> Result<IntentResolution, EngineError> {
    let in_domain = match first(reply, "in_domain").map(|v| v.to_ascii_lowercase()) {
        None => true,
        Some(v) if v.starts_with("true") || v.starts_with("yes") => true,
        Some(v) if v.starts_with("false") || v.starts_with("no") => false,
        Some(v) => return Err(EngineError::Classification(format!("in_domain must be true or false, got {v:?}"))),
    };
    if !in_domain {
        return Ok(IntentResolution::off_domain());
    }
    let cats =
        first(reply, "category").ok_or_else(|| EngineError::Classification("reply has no category line".into()))?;
    let mut categories: Vec<AgentKind> = Vec::new();
    for c in cats.split([',', ';']).map(str::trim).filter(|c| !c.is_empty()) {
        match c.parse::<AgentKind>() {
            Ok(a) if !categories.contains(&a) => categories.push(a),
            Ok(_) => {}
            Err(_) => tracing::debug!(category = c, "ignoring unknown category"),
        }
    }
    if categories.is_empty() {
        return Err(EngineError::Classification(format!("no known category in {cats:?}")));
    }
    let only_qa = categories == [AgentKind::SecurityQa];
    let mode = match first(reply, "mode") {
        Some(m) => m.parse::<IntentMode>().map_err(|_| EngineError::Classification(format!("unknown mode {m:?}")))?,
        None if only_qa => IntentMode::Informational,
        None => IntentMode::Task,
    };
    let mut detected_artifacts: Vec<ArtifactKind> = Vec::new();
    if let Some(a) = first(reply, "artifacts").filter(|a| !is_none(a)) {
        for k in a.split(',').filter_map(|k| k.parse::<ArtifactKind>().ok()) {
            if !detected_artifacts.contains(&k) {
                detected_artifacts.push(k);
            }
        }
    }
    for a in attachments {
        if !detected_artifacts.contains(&a.kind) {
            detected_artifacts.push(a.kind);
        }
    }
    let mentioned_vulnerabilities = first(reply, "vulnerabilities")
        .filter(|v| !is_none(v))
        .map(|v| v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
        .unwrap_or_default();
    Ok(IntentResolution { categories, mode, detected_artifacts, mentioned_vulnerabilities, in_domain })
}

fn attachment_listing(attachments: &[ArtifactRef]) -> String {
    if attachments.is_empty() {
        return "none".into();
    }
    attachments.iter().map(|a| format!("{} ({})", a.filename, a.kind)).collect::<Vec<_>>().join(", ")
}

/// Classifies a request with one backend call.
pub fn detect_intent(
    gateway: &Gateway,
    backend_id: &str,
    query: &str,
    attachments: &[ArtifactRef],
) -> Result<IntentResolution, EngineError> {
    if query.trim().is_empty() {
        return Err(EngineError::EmptyQuery);
    }
    let reply = gateway.complete(
        backend_id,
        &ChatRequest::new("intent_detect")
            .var("query", query.trim())
            .var("attachments", attachment_listing(attachments))
            .max_tokens(128),
    )?;
    parse_intent(&reply.text, attachments)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Complete(BTreeMap<String, InputValue>),
    /// Missing requirements in declaration order.
    NeedsInput(Vec<Requirement>),
}

/// Gathers what the request already provides into `context`: attachments by
/// kind, the query itself for the Q&A agent and named vulnerabilities as
/// threat vectors. Items already gathered are kept.
pub fn gather_from_request(
    context: &mut TaskContext,
    intent: &IntentResolution,
    query: &str,
    attachments: &[ArtifactRef],
) {
    let agent = intent.primary();
    for r in requirements(agent) {
        if context.gathered_inputs.contains_key(&r.name) {
            continue;
        }
        match r.kind {
            RequirementKind::Artifact(kind) => {
                if let Some(a) = attachments.iter().find(|a| a.kind == kind) {
                    context.gather(r.name.clone(), InputValue::Artifact(a.clone()));
                }
            }
            RequirementKind::Text if r.name == "query" && !query.trim().is_empty() => {
                context.gather(r.name.clone(), InputValue::Text(query.trim().to_string()));
            }
            RequirementKind::Text if r.name == "threat_vectors" && !intent.mentioned_vulnerabilities.is_empty() => {
                context.gather(r.name.clone(), InputValue::Text(intent.mentioned_vulnerabilities.join("\n")));
            }
            RequirementKind::Text => {}
        }
    }
}

/// Compares gathered inputs with the primary agent's requirements.
pub fn validate_context(intent: &IntentResolution, context: &TaskContext) -> Validation {
    let reqs = requirements(intent.primary());
    let missing: Vec<Requirement> =
        reqs.iter().filter(|r| !context.gathered_inputs.contains_key(&r.name)).cloned().collect();
    if !missing.is_empty() {
        return Validation::NeedsInput(missing);
    }
    Validation::Complete(reqs.iter().map(|r| (r.name.clone(), context.gathered_inputs[&r.name].clone())).collect())
}

/// Plan for the primary agent with its canonical step list. Extra inputs
/// (dialogue state for the chat agent) may ride along.
pub fn build_plan(intent: &IntentResolution, inputs: BTreeMap<String, InputValue>) -> Result<TaskPlan, EngineError> {
    if !intent.in_domain {
        return Err(EngineError::Plan("off-domain requests get no plan".into()));
    }
    let plan = TaskPlan { plan_id: new_id(), agent: intent.primary(), steps: pipeline(intent.primary()), inputs };
    plan.check_dataflow().map_err(|e| EngineError::Plan(e.to_string()))?;
    Ok(plan)
}

pub fn reject_off_domain(_query: &str) -> &'static str {
    REFUSAL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(kind: ArtifactKind, name: &str) -> ArtifactRef {
        ArtifactRef { artifact_id: new_id(), kind, filename: name.into(), byte_length: 1 }
    }

    #[test]
    fn lenient_parsing() {
        let i = parse_intent(
            "Sure.\nCategory: Bug Validation, security_qa\nMODE: task\nin_domain: TRUE\nartifacts: rtl_design\nvulnerabilities: none\ncategory: threat_modeling",
            &[],
        )
        .unwrap();
        assert_eq!(i.categories, [AgentKind::BugValidation, AgentKind::SecurityQa]);
        assert_eq!(i.mode, IntentMode::Task);
        assert_eq!(i.detected_artifacts, [ArtifactKind::RtlDesign]);
        assert!(i.mentioned_vulnerabilities.is_empty());
        assert_eq!(i.primary(), AgentKind::BugValidation);
    }

    #[test]
    fn off_domain_is_singleton_qa() {
        let i = parse_intent("category: property_generation\nmode: task\nin_domain: false", &[]).unwrap();
        assert_eq!(i, IntentResolution::off_domain());
        assert!(build_plan(&i, BTreeMap::new()).is_err());
    }

    #[test]
    fn unparseable_is_retryable() {
        let e = parse_intent("I think this is about hardware.", &[]).unwrap_err();
        assert!(e.is_retryable());
        assert!(parse_intent("category: cooking", &[]).is_err());
    }

    #[test]
    fn refinement_converges() {
        let intent = parse_intent("category: property_generation\nmode: task\nin_domain: true", &[]).unwrap();
        let rtl = art(ArtifactKind::RtlDesign, "uart.sv");
        let mut ctx = TaskContext::default();
        gather_from_request(&mut ctx, &intent, "Generate assertions", std::slice::from_ref(&rtl));
        let Validation::NeedsInput(missing) = validate_context(&intent, &ctx) else {
            panic!("expected needs_input");
        };
        assert_eq!(missing.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["threat_vectors"]);
        ctx.gather("threat_vectors", InputValue::Text("Improper Access Control".into()));
        let Validation::Complete(inputs) = validate_context(&intent, &ctx) else {
            panic!("expected complete");
        };
        assert_eq!(inputs["rtl_design"], InputValue::Artifact(rtl));
        let plan = build_plan(&intent, inputs).unwrap();
        let names: Vec<&str> = plan.steps.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["classify_design", "map_cwe", "generate_properties", "self_reflect"]);
    }

    #[test]
    fn named_vulnerabilities_fill_threat_vectors() {
        let intent = parse_intent(
            "category: property_generation\nmode: task\nin_domain: true\nvulnerabilities: Improper Access Control; debug unlock",
            &[],
        )
        .unwrap();
        let mut ctx = TaskContext::default();
        gather_from_request(&mut ctx, &intent, "q", &[art(ArtifactKind::RtlDesign, "a.v")]);
        assert!(matches!(validate_context(&intent, &ctx), Validation::Complete(_)));
        assert_eq!(
            ctx.gathered_inputs["threat_vectors"],
            InputValue::Text("Improper Access Control\ndebug unlock".into())
        );
    }

    #[test]
    fn missing_list_keeps_declaration_order() {
        let intent = parse_intent("category: bug_validation", &[]).unwrap();
        let Validation::NeedsInput(m) = validate_context(&intent, &TaskContext::default()) else { panic!() };
        assert_eq!(m.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["rtl_design", "bug_report"]);
    }
}
