mod common;

use serde_json::json;
use svw_core::{AgentKind, ArtifactKind, Author, CoreError, SessionConfig};
use svw_engine::{ApiMessage, EngineError, Reply, REFUSAL};

use common::{kinds, read, workbench};

fn names(r: &Reply) -> Vec<String> {
    match r {
        Reply::NeedsInput { requirements, .. } => requirements.iter().map(|q| q.name.clone()).collect(),
        other => panic!("expected needs_input, got {other:?}"),
    }
}

#[test]
fn property_request_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let rtl = wb.upload("uart_dma_top.v", &read("designs/uart_dma_top.v"), None).unwrap();
    assert_eq!(rtl.kind, ArtifactKind::RtlDesign);
    let mut ev = Vec::new();
    let r = wb
        .handle_message(
            &s.session_id,
            "Write SystemVerilog assertions for improper access control in uart_dma_top.",
            std::slice::from_ref(&rtl.artifact_id),
            &mut ev,
        )
        .unwrap();
    let Reply::Answer { agent, artifacts, .. } = &r else { panic!("{r:?}") };
    assert_eq!(*agent, Some(AgentKind::PropertyGeneration));
    let k = kinds(&ev);
    assert_eq!(k.first(), Some(&"user_message"));
    assert_eq!(k.last(), Some(&"answer"));
    assert_eq!(k.iter().filter(|x| **x == "artifact_ready").count(), artifacts.len());
    assert!(k.contains(&"step_progress"));

    let sva = artifacts.iter().find(|a| a.kind == ArtifactKind::SvaFile).unwrap();
    assert_eq!(sva.filename, "properties_uart_dma_top.sva");
    let text = wb.store().read_artifact_text(&sva.artifact_id).unwrap();
    let table = svw_hdl::parse_ports(&String::from_utf8(read("designs/uart_dma_top.v")).unwrap()).unwrap();
    let parsed = svw_agents::properties::reparse_sva_file(&text, &table).unwrap();
    assert_eq!(parsed.len(), 3);

    let session = wb.session(&s.session_id).unwrap();
    let authors: Vec<Author> = session.transcript.iter().map(|t| t.author).collect();
    assert_eq!(authors, [Author::User, Author::Agent(AgentKind::PropertyGeneration)]);
    assert_eq!(session.transcript[1].attachments, *artifacts);
    assert_eq!(session.short_term.active_plan, None);
}

#[test]
fn missing_inputs_are_requested_then_gathered() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, mock) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let rtl = wb.upload("uart_dma_top.v", &read("designs/uart_dma_top.v"), None).unwrap();
    let mut ev = Vec::new();
    let r = wb
        .handle_message(
            &s.session_id,
            "Generate security properties for the debug interface of this design.",
            &[rtl.artifact_id],
            &mut ev,
        )
        .unwrap();
    assert_eq!(names(&r), ["threat_vectors"]);
    assert!(matches!(r, Reply::NeedsInput { plan_id: None, .. }));
    assert_eq!(kinds(&ev), ["user_message", "needs_input"]);
    let v = serde_json::to_value(&ev[1]).unwrap();
    assert_eq!(v["requirements"][0]["name"], "threat_vectors");
    assert_eq!(v["requirements"][0]["kind"], "text");
    assert!(!dir.path().join("sessions").join(&s.session_id).join("plans").exists());

    let calls = mock.call_count();
    let r = wb.handle_message(&s.session_id, "Improper Access Control", &[], &mut Vec::new()).unwrap();
    assert!(matches!(r, Reply::Answer { agent: Some(AgentKind::PropertyGeneration), .. }), "{r:?}");
    // no second classification: the message was taken as the missing input
    assert!(mock.calls()[calls..].iter().all(|c| c.template_id != "intent_detect"));
    let t = &wb.session(&s.session_id).unwrap().transcript;
    assert_eq!(t.len(), 4);
    assert_eq!(t[1].author, Author::System);
}

#[test]
fn off_domain_request_is_refused_without_a_plan() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, mock) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let mut ev = Vec::new();
    let r = wb.handle_message(&s.session_id, "What's a good recipe for banana bread?", &[], &mut ev).unwrap();
    assert_eq!(r, Reply::Answer { agent: None, text: REFUSAL.into(), artifacts: vec![] });
    assert_eq!(mock.call_count(), 1);
    assert!(!dir.path().join("sessions").join(&s.session_id).join("plans").exists());
    let t = wb.session(&s.session_id).unwrap().transcript;
    assert_eq!(t[1].author, Author::System);
    assert_eq!(t[1].content, REFUSAL);
    assert_eq!(kinds(&ev), ["user_message", "answer"]);
}

#[test]
fn threat_dialogue_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let sid = s.session_id.clone();
    let spec = wb.upload("neorv32_mini.md", &read("specs/neorv32_mini.md"), None).unwrap();
    assert_eq!(spec.kind, ArtifactKind::SpecDocument);

    // asset identification first; its JSON feeds the threat model
    let r = wb
        .handle_message(
            &sid,
            "Identify the security assets in the attached NEORV32 specification.",
            std::slice::from_ref(&spec.artifact_id),
            &mut Vec::new(),
        )
        .unwrap();
    let Reply::Answer { artifacts, .. } = r else { panic!("{r:?}") };
    let assets = artifacts.iter().find(|a| a.kind == ArtifactKind::AssetJson).unwrap().clone();

    let r = wb
        .handle_message(
            &sid,
            "Build a threat model for the SoC using the spec and the asset list.",
            &[spec.artifact_id.clone(), assets.artifact_id.clone()],
            &mut Vec::new(),
        )
        .unwrap();
    assert_eq!(names(&r), ["threat_r0_q0", "threat_r0_q1"]);
    let Reply::NeedsInput { plan_id: Some(plan_id), .. } = &r else { panic!() };
    let checkpoint = wb.store().load_execution(&sid, plan_id).unwrap();

    // a partial answer changes nothing and asks for the rest
    let r = wb.handle_message(&sid, "threat_r0_q0: only in our own lab", &[], &mut Vec::new()).unwrap();
    assert_eq!(names(&r), ["threat_r0_q1"]);
    assert_eq!(wb.store().load_execution(&sid, plan_id).unwrap(), checkpoint);

    let r = wb.handle_message(&sid, "threat_r0_q1: yes, from a third-party fab", &[], &mut Vec::new()).unwrap();
    assert_eq!(names(&r), ["testing_infrastructure", "budget", "timeline"]);
    let transcript = std::fs::read(wb.store().transcript_path(&sid).unwrap()).unwrap();
    drop(wb);

    // restart: same data directory, fresh process state
    let (wb, _) = workbench(dir.path());
    assert_eq!(std::fs::read(wb.store().transcript_path(&sid).unwrap()).unwrap(), transcript);
    let st = wb.store().load_execution(&sid, plan_id).unwrap();
    assert_eq!(st.answers["threat_r0_q0"], "only in our own lab");
    let mut ev = Vec::new();
    let r = wb
        .handle_message(
            &sid,
            "testing_infrastructure: logic analyzer, simulator\nbudget: 20k USD\ntimeline: 6 weeks",
            &[],
            &mut ev,
        )
        .unwrap();
    let Reply::Answer { agent, artifacts, .. } = &r else { panic!("{r:?}") };
    assert_eq!(*agent, Some(AgentKind::ThreatModeling));
    let files: Vec<&str> = artifacts.iter().map(|a| a.filename.as_str()).collect();
    assert_eq!(files, ["threat_model_neorv32_mini.json", "test_plan_neorv32_mini.json", "test_plan_neorv32_mini.md"]);
    let md = wb.store().read_artifact_text(&artifacts[2].artifact_id).unwrap();
    assert!(md.contains("(requires acquisition)"), "{md}");
    // the completed plan was not re-run from scratch
    let progress: Vec<String> = ev
        .iter()
        .filter_map(|e| match e {
            ApiMessage::StepProgress { progress, .. } if progress.status == "succeeded" => Some(progress.step.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(progress, ["generate_test_plan"]);
}

#[test]
fn cancel_abandons_a_suspended_plan() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let rtl = wb.upload("uart_dma_top.v", &read("designs/uart_dma_top.v"), None).unwrap();
    wb.handle_message(
        &s.session_id,
        "Generate security properties for the debug interface of this design.",
        &[rtl.artifact_id],
        &mut Vec::new(),
    )
    .unwrap();
    let r = wb.handle_message(&s.session_id, "cancel", &[], &mut Vec::new()).unwrap();
    assert!(matches!(r, Reply::Answer { agent: None, .. }));
    assert_eq!(wb.session(&s.session_id).unwrap().short_term, Default::default());
}

#[test]
fn question_answer_and_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    let s = wb.create_session(SessionConfig::default()).unwrap();
    let mut ev = Vec::new();
    let r = wb
        .handle_message(
            &s.session_id,
            "What is hardware fuzzing and how does it find bugs in processors?",
            &[],
            &mut ev,
        )
        .unwrap();
    let Reply::Answer { agent, text, artifacts } = &r else { panic!("{r:?}") };
    assert_eq!(*agent, Some(AgentKind::SecurityQa));
    assert!(text.starts_with("Hardware fuzzing feeds"), "{text}");
    assert!(artifacts.is_empty());
    let ApiMessage::Answer { citations, .. } = ev.last().unwrap() else { panic!() };
    assert!(citations.iter().any(|c| c["source"] == "hardware_fuzzing.md#000000"));

    // feedback endpoint regenerates from the same evidence
    let r = wb.feedback(&s.session_id, "Too long, one sentence please.", &mut Vec::new()).unwrap();
    let Reply::Answer { text, .. } = &r else { panic!() };
    assert!(text.starts_with("Hardware fuzzing runs coverage-guided"), "{text}");

    // feedback given as a chat message reaches the same path
    let r = wb.handle_message(&s.session_id, "Make it shorter", &[], &mut Vec::new()).unwrap();
    let Reply::Answer { text, .. } = &r else { panic!() };
    assert!(text.starts_with("Hardware fuzzing runs coverage-guided"), "{text}");
    assert_eq!(wb.session(&s.session_id).unwrap().transcript.len(), 6);
}

#[test]
fn configuration_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    assert!(matches!(
        wb.create_session(SessionConfig { backend_id: "nope".into(), ..SessionConfig::default() }),
        Err(EngineError::Core(CoreError::Config(_)))
    ));
    let s = wb.create_session(SessionConfig::default()).unwrap();
    for bad in [json!({"retrieval_k": 0}), json!({"bogus": 1}), json!({"confidence_threshold": "high"}), json!([1])] {
        assert!(matches!(wb.update_config(&s.session_id, &bad), Err(EngineError::Core(CoreError::Config(_)))), "{bad}");
    }
    let c = wb.update_config(&s.session_id, &json!({"confidence_threshold": 0.9})).unwrap();
    assert_eq!(c.confidence_threshold, 0.9);
    assert_eq!(wb.config(&s.session_id).unwrap(), c);
}

#[test]
fn unknown_session_and_empty_message() {
    let dir = tempfile::tempdir().unwrap();
    let (wb, _) = workbench(dir.path());
    let e = wb.handle_message("0123456789abcdef0123456789abcdef", "hi", &[], &mut Vec::new()).unwrap_err();
    assert!(matches!(e, EngineError::Core(CoreError::NotFound { .. })));
    let s = wb.create_session(SessionConfig::default()).unwrap();
    assert!(matches!(wb.handle_message(&s.session_id, "   ", &[], &mut Vec::new()), Err(EngineError::EmptyQuery)));
    assert!(wb.session(&s.session_id).unwrap().transcript.is_empty());
}
