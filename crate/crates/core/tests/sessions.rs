use std::sync::Arc;

use proptest::prelude::*;
use svw_core::*;
use svw_llm::{Gateway, MockBackend};

fn now() -> chrono::DateTime<chrono::Utc> {
    FixedClock::epoch().now()
}

fn gateway(mock: Arc<MockBackend>) -> Gateway {
    Gateway::with_builtin_templates().with_backend("mock", mock)
}

fn session_with(turns: &[(&str, &str)]) -> Session {
    let mut s = create_session(SessionConfig::default(), now()).unwrap();
    for (author, text) in turns {
        let t = s.next_turn(author.parse().unwrap(), *text, vec![], now());
        s.append_turn(t).unwrap();
    }
    s
}

#[test]
fn empty_transcript_is_fresh_without_backend_call() {
    let mock = Arc::new(MockBackend::new());
    let s = session_with(&[]);
    assert_eq!(resolve_follow_up(&s, "anything", &gateway(mock.clone())).unwrap(), FollowUp::Fresh);
    assert_eq!(mock.call_count(), 0);
}

#[test]
fn follow_up_from_fixture_table() {
    // Oracle: the scripted reply for each query.
    let table = [
        ("what about its reset behavior?", "follow-up of turn 2", FollowUp::FollowUp { anchor_turn_index: 2 }),
        ("list fuzzing frameworks", "fresh", FollowUp::Fresh),
    ];
    let mock = Arc::new(MockBackend::new());
    for (q, reply, _) in &table {
        mock.script_contains("follow_up", &format!("New query: {q}"), reply);
    }
    let s = session_with(&[
        ("user", "explain the AES key schedule"),
        ("security_qa", "It expands..."),
        ("user", "and the sbox?"),
    ]);
    let g = gateway(mock);
    for (q, _, expected) in &table {
        assert_eq!(resolve_follow_up(&s, q, &g).unwrap(), *expected, "{q}");
    }
}

#[test]
fn backend_missing_is_an_error() {
    let s = session_with(&[("user", "x")]);
    let g = Gateway::with_builtin_templates();
    assert!(matches!(resolve_follow_up(&s, "y", &g), Err(CoreError::Backend(_))));
}

#[test]
fn config_echo() {
    let cfg = SessionConfig { confidence_threshold: 0.5, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let s = store.create_session(cfg, now()).unwrap();
    assert_eq!(store.load_session(&s.session_id).unwrap().config.confidence_threshold, 0.5);
    assert!(matches!(
        create_session(SessionConfig { retrieval_k: 0, ..Default::default() }, now()),
        Err(CoreError::Config(_))
    ));
}

fn author() -> impl Strategy<Value = Author> {
    prop_oneof![Just(Author::User), Just(Author::System), prop::sample::select(AgentKind::ALL).prop_map(Author::Agent),]
}

proptest! {
    #[test]
    fn append_preserves_prefix(turns in prop::collection::vec((author(), ".{0,40}"), 0..12), extra in ".{0,40}") {
        let mut s = create_session(SessionConfig::default(), now()).unwrap();
        for (a, text) in &turns {
            let t = s.next_turn(*a, text.clone(), vec![], now());
            s.append_turn(t).unwrap();
        }
        let before = transcript_ndjson(&s.transcript);
        let t = s.next_turn(Author::User, extra, vec![], now());
        s.append_turn(t).unwrap();
        let after = transcript_ndjson(&s.transcript);
        prop_assert!(after.starts_with(&before));
        prop_assert_eq!(after.lines().count(), turns.len() + 1);
    }

    #[test]
    fn store_round_trip_and_replay(turns in prop::collection::vec((author(), "[a-z \\n\"]{0,30}"), 0..8)) {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut a = store.create_session(SessionConfig::default(), now()).unwrap();
        let mut b = store.create_session(SessionConfig::default(), now()).unwrap();
        for (au, text) in &turns {
            for s in [&mut a, &mut b] {
                let t = s.next_turn(*au, text.clone(), vec![], now());
                store.append_turn(s, t).unwrap();
            }
        }
        let ta = std::fs::read(store.transcript_path(&a.session_id).unwrap()).unwrap();
        let tb = std::fs::read(store.transcript_path(&b.session_id).unwrap()).unwrap();
        prop_assert_eq!(&ta, &tb);
        prop_assert_eq!(String::from_utf8(ta).unwrap(), transcript_ndjson(&a.transcript));
        prop_assert_eq!(store.load_session(&a.session_id).unwrap(), a);
    }

    #[test]
    fn sessions_are_isolated(name in "[a-z]{1,8}", value in ".{0,20}") {
        let a = create_session(SessionConfig::default(), now()).unwrap();
        let mut b = a.clone();
        let before = serde_json::to_string(&a.short_term).unwrap();
        b.short_term.gather(name, InputValue::Text(value));
        prop_assert_eq!(serde_json::to_string(&a.short_term).unwrap(), before);
        prop_assert_ne!(a.session_id, create_session(SessionConfig::default(), now()).unwrap().session_id);
    }
}

#[test]
fn execution_state_persists() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let s = store.create_session(SessionConfig::default(), now()).unwrap();
    let plan = TaskPlan {
        plan_id: new_id(),
        agent: AgentKind::SecurityQa,
        steps: vec![StepSpec::new("answer", &["query"], "answer")],
        inputs: [("query".to_string(), InputValue::Text("q".into()))].into(),
    };
    let mut st = ExecutionState::new(plan);
    st.step_states[0] = StepState::Suspended { requirements: vec![Requirement::text("budget", "Budget")], attempts: 1 };
    st.status = PlanStatus::Suspended;
    store.save_execution(&s.session_id, &st).unwrap();
    assert_eq!(store.load_execution(&s.session_id, st.plan_id()).unwrap(), st);
}
