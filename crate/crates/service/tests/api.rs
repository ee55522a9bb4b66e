mod common;

use axum::http::{header, Method, StatusCode};
use serde_json::json;
use svw_service::ServiceConfig;

use common::*;

#[tokio::test]
async fn sessions_are_created_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let a = new_session(&app).await;
    let b = new_session(&app).await;
    assert_ne!(a, b);
    assert_eq!(a.len(), 32);
    assert!(a.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));

    let (s, v) = json(&app, Method::POST, "/api/sessions", Some(json!({"retrieval_k": 3}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["config"]["retrieval_k"], 3);
    for bad in [json!({"retrieval_k": 0}), json!({"model": "x"}), json!({"backend_id": "nope"}), json!("x")] {
        let (s, v) = json(&app, Method::POST, "/api/sessions", Some(bad.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad} -> {v}");
        assert!(v["error"].is_string());
    }
    let (s, v) = json(&app, Method::GET, &format!("/api/sessions/{a}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["session_id"], a.as_str());
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let ghost = "0123456789abcdef0123456789abcdef";
    let (s, _) = stream(&app, &format!("/api/sessions/{ghost}/messages"), json!({"text": "hi"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = stream(&app, "/api/sessions/../messages", json!({"text": "hi"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = json(&app, Method::GET, &format!("/api/sessions/{ghost}/config"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = upload(&app, ghost, "a.v", b"module a; endmodule", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = download(&app, ghost).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = download(&app, "not-an-id").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fuzzing_question_streams_progress_then_a_cited_answer() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let sid = new_session(&app).await;
    let ev = message(&app, &sid, "What is hardware fuzzing and how does it find bugs in processors?", &[]).await;
    assert_eq!(types(&ev), ["user_message", "step_progress", "step_progress", "answer"]);
    assert_eq!(ev[1]["progress"]["step"], "answer");
    assert_eq!(ev[1]["progress"]["status"], "running");
    assert_eq!(ev[2]["progress"]["status"], "succeeded");
    let answer = &ev[3];
    assert_eq!(answer["agent"], "security_qa");
    assert_eq!(answer["session_id"], sid.as_str());
    assert!(answer["citations"].as_array().unwrap().iter().any(|c| c["source"] == "hardware_fuzzing.md#000000"));

    let (s, fb) = stream(&app, &format!("/api/sessions/{sid}/feedback"), json!({"text": "Too long."})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(types(&fb), ["user_message", "answer"]);
    assert!(fb[1]["text"].as_str().unwrap().starts_with("Hardware fuzzing runs coverage-guided"));
}

#[tokio::test]
async fn property_request_suspends_then_completes_with_a_download() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let sid = new_session(&app).await;
    let rtl = read("designs/uart_dma_top.v");
    let (s, art) = upload(&app, &sid, "uart_dma_top.v", &rtl, None).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(art["kind"], "rtl_design");
    let rtl_id = art["artifact_id"].as_str().unwrap();

    let ev =
        message(&app, &sid, "Generate security properties for the debug interface of this design.", &[rtl_id]).await;
    assert_eq!(types(&ev), ["user_message", "needs_input"]);
    assert_eq!(ev[1]["requirements"][0]["name"], "threat_vectors");

    let ev = message(&app, &sid, "Improper Access Control", &[]).await;
    let t = types(&ev);
    assert_eq!(t.last(), Some(&"answer"));
    // progress arrives in plan-step order and nothing follows the answer
    let steps: Vec<&str> = ev
        .iter()
        .filter(|e| e["type"] == "step_progress" && e["progress"]["status"] == "succeeded")
        .map(|e| e["progress"]["step"].as_str().unwrap())
        .collect();
    assert_eq!(steps, ["classify_design", "map_cwe", "generate_properties", "self_reflect"]);
    let sva = ev.iter().find(|e| e["type"] == "artifact_ready" && e["artifact"]["kind"] == "sva_file").unwrap();
    let id = sva["artifact"]["artifact_id"].as_str().unwrap();
    let (s, headers, bytes) = download(&app, id).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "text/plain; charset=utf-8");
    assert_eq!(sva["artifact"]["byte_length"], bytes.len());
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let table = svw_hdl::parse_ports(&String::from_utf8(rtl).unwrap()).unwrap();
    let report = svw_hdl::check_sva_file(&text, Some(&table), Default::default());
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
    assert_eq!(report.assertions.len(), 3);
}

#[tokio::test]
async fn uploads_are_checked_and_classified() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig { max_upload: 1024, ..service_config(dir.path()) };
    let app = app(&cfg);
    let sid = new_session(&app).await;
    let (s, _) = upload(&app, &sid, "empty.v", b"", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = upload(&app, &sid, "big.bin", &[7u8; 1025], None).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    // past the transport limit as well
    let (s, _) = upload(&app, &sid, "huge.bin", &vec![7u8; 200 * 1024], None).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    let (s, v) = upload(&app, &sid, "edge.bin", &[7u8; 1024], None).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");

    let (_, v) = upload(&app, &sid, "fsm.v", b"module fsm; endmodule\n", None).await;
    assert_eq!(v["kind"], "rtl_design");
    let assets = br#"[{"IP": "uart", "Assets": [{"Asset_Name": "k", "Functionality": "f", "Security Objective": "Integrity", "Justification": "j"}]}]"#;
    let (_, v) = upload(&app, &sid, "out.json", assets, None).await;
    assert_eq!(v["kind"], "asset_json");
    let (_, v) = upload(&app, &sid, "notes.txt", b"the bug", Some("bug_report")).await;
    assert_eq!(v["kind"], "bug_report");
    let (s, _) = upload(&app, &sid, "notes.txt", b"x", Some("poem")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let sid = new_session(&app).await;
    let uri = format!("/api/sessions/{sid}/config");
    let (s, v) = json(&app, Method::PUT, &uri, Some(json!({"retrieval_k": 3}))).await;
    assert_eq!((s, &v["retrieval_k"]), (StatusCode::OK, &json!(3)));
    let (_, v) = json(&app, Method::GET, &uri, None).await;
    assert_eq!(v["retrieval_k"], 3);
    assert_eq!(v["backend_id"], "mock");
    for bad in [json!({"confidence_threshold": 2}), json!({"retrieval_k": -1}), json!({"colour": "red"})] {
        let (s, _) = json(&app, Method::PUT, &uri, Some(bad)).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
    }
    let (_, v) = json(&app, Method::GET, &uri, None).await;
    assert_eq!(v["retrieval_k"], 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_are_served_concurrently() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&service_config(dir.path()));
    let mut ids = Vec::new();
    for _ in 0..6 {
        ids.push(new_session(&app).await);
    }
    let runs = ids.iter().map(|sid| {
        let app = app.clone();
        let sid = sid.clone();
        tokio::spawn(async move {
            message(&app, &sid, "What is hardware fuzzing and how does it find bugs in processors?", &[]).await
        })
    });
    for r in runs {
        let ev = r.await.unwrap();
        assert_eq!(types(&ev).last(), Some(&"answer"));
    }
    for sid in &ids {
        let (_, v) = json(&app, Method::GET, &format!("/api/sessions/{sid}"), None).await;
        assert_eq!(v["transcript"].as_array().unwrap().len(), 2);
    }
}

#[tokio::test]
async fn backend_failure_ends_the_stream_with_an_error_event() {
    let dir = tempfile::tempdir().unwrap();
    // no mock fixtures: every completion fails
    let app = app(&ServiceConfig::new(dir.path()));
    let sid = new_session(&app).await;
    let ev = message(&app, &sid, "What is hardware fuzzing?", &[]).await;
    assert_eq!(types(&ev), ["user_message", "error"]);
    assert_eq!(ev[1]["session_id"], sid.as_str());
}
