//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::{header, StatusCode};
use rand::{Rng, SeedableRng};
use serde_json::Value;
use svw_agents::bugvalidate::{metric_report, parse_roi, parse_trace, validate, ValidationReport, VerdictOutcome};
use svw_agents::properties::{PropertyReport, PropertyStatus};
use svw_agents::{pipeline, AgentEnv, AgentRunner, ResolvedInput, Resources, StepCall, StepOutcome, StepRunner};
use svw_core::{
    AgentKind, ArtifactKind, ArtifactRef, ExecutionState, FixedClock, InputValue, SessionConfig, StepSpec, TaskPlan,
};
use svw_engine::{build_plan, detect_intent, Limits, Orchestrator, Reply, RunOutcome, Workbench};
use svw_hdl::{check_sva, check_sva_file, parse_ports, DiagnosticKind};
use svw_knowledge::{EmbeddingVector, KnowledgeChunk, VectorStore};
use svw_llm::{Gateway, MockBackend};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn text(rel: &str) -> String {
    String::from_utf8(read(rel)).unwrap()
}

fn workbench(dir: &Path) -> Workbench {
    service_config(dir).build_with_clock(Arc::new(FixedClock::epoch())).unwrap()
}

fn upload_fixture(wb: &Workbench, rel: &str) -> InputValue {
    let name = Path::new(rel).file_name().unwrap().to_str().unwrap();
    InputValue::Artifact(wb.upload(name, &read(rel), None).unwrap())
}

fn artifact<'a>(reply: &'a Reply, filename: &str) -> Result<&'a ArtifactRef, String> {
    match reply {
        Reply::Answer { artifacts, .. } => artifacts
            .iter()
            .find(|a| a.filename == filename)
            .ok_or_else(|| format!("no {filename} among {artifacts:?}")),
        other => Err(format!("run did not complete: {other:?}")),
    }
}

// Bug validation on the authentication FSM.
fn case_v() -> Outcome {
    let roi_signals: BTreeSet<&str> =
        ["isHashValid", "inputHash", "correctHash", "authenticationFlag", "currentState"].into();
    let mut runs = Vec::new();
    let mut slowest = Duration::ZERO;
    for _ in 0..10 {
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let wb = workbench(dir.path());
        let sid = wb.create_session(SessionConfig::default()).unwrap().session_id;
        let inputs = BTreeMap::from([
            ("rtl_design".to_string(), upload_fixture(&wb, "designs/Authentication_Bypass.v")),
            ("bug_report".to_string(), upload_fixture(&wb, "bugs/Authentication_Bypass.txt")),
        ]);
        let reply = wb.run_agent(&sid, AgentKind::BugValidation, inputs, &mut Vec::new()).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        let verdict =
            wb.store().read_artifact(&artifact(&reply, "verdict_Authentication_Bypass.json")?.artifact_id).unwrap();
        let tb = wb.store().read_artifact(&artifact(&reply, "testbench_Authentication_Bypass.v")?.artifact_id).unwrap();
        runs.push((verdict, tb));
    }
    ensure!(runs.iter().all(|r| *r == runs[0]), "outputs differ between runs");
    let report: ValidationReport = serde_json::from_slice(&runs[0].0).map_err(|e| e.to_string())?;
    let v = &report.verdict;
    ensure!(v.outcome == VerdictOutcome::Match, "verdict {:?}: {}", v.outcome, report.summary);
    ensure!(v.roi_time_ns == 45 && v.record_time_ns == Some(45), "compared at {:?}", v.record_time_ns);
    let compared: BTreeSet<&str> = v.detail.iter().map(|d| d.signal.as_str()).collect();
    ensure!(v.detail.len() == 5 && compared == roi_signals, "comparisons {compared:?}");
    ensure!(v.detail.iter().all(|d| d.equal), "mismatch in {:?}", v.detail);
    ensure!(slowest < Duration::from_secs(5), "slowest run {slowest:?}");
    Ok(format!("match at 45 ns, 5/5 signals, 10 identical runs, slowest {slowest:.0?}"))
}

// Property generation for uart_dma_top.
fn case_iii() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let wb = workbench(dir.path());
    let sid = wb.create_session(SessionConfig::default()).unwrap().session_id;
    let inputs = BTreeMap::from([
        ("rtl_design".to_string(), upload_fixture(&wb, "designs/uart_dma_top.v")),
        ("threat_vectors".to_string(), InputValue::Text("Improper Access Control".into())),
    ]);
    let reply =
        wb.run_agent(&sid, AgentKind::PropertyGeneration, inputs, &mut Vec::new()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let json = wb.store().read_artifact(&artifact(&reply, "properties_uart_dma_top.json")?.artifact_id).unwrap();
    let report: PropertyReport = serde_json::from_slice(&json).map_err(|e| e.to_string())?;
    let cwes: BTreeSet<u32> = report.selection.cwes.iter().map(|c| c.id).collect();
    ensure!(cwes.contains(&284) && cwes.contains(&1244), "CWE set {cwes:?}");

    let table = parse_ports(&text("designs/uart_dma_top.v")).unwrap();
    let emitted: Vec<_> = report.properties.iter().filter(|p| p.is_validated()).collect();
    ensure!(!emitted.is_empty(), "no properties emitted");
    for p in &emitted {
        check_sva(&p.sva, &table).map_err(|d| format!("{} fails check_sva: {d:?}", p.sva))?;
    }
    let sva = wb.store().read_artifact_text(&artifact(&reply, "properties_uart_dma_top.sva")?.artifact_id).unwrap();
    let file = check_sva_file(&sva, Some(&table), Default::default());
    ensure!(file.diagnostics.is_empty() && file.assertions.len() == emitted.len(), "sva file: {:?}", file.diagnostics);

    // the seeded candidate names a signal the design does not declare
    let seeded: Vec<_> = report
        .properties
        .iter()
        .filter(|p| {
            check_sva(&p.sva, &table).is_err_and(|d| d.iter().any(|x| x.kind == DiagnosticKind::UndeclaredSignal))
        })
        .collect();
    ensure!(!seeded.is_empty(), "fixture has no undeclared-signal candidate");
    for p in &seeded {
        ensure!(
            matches!(&p.status, PropertyStatus::Rejected { reason } if reason.starts_with("signal-consistency")),
            "undeclared-signal candidate not rejected: {:?}",
            p.status
        );
    }
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "CWEs {cwes:?}, {} properties pass check_sva, {} seeded candidate rejected, {elapsed:.0?}",
        emitted.len(),
        seeded.len()
    ))
}

// Asset identification on the NEORV32-style spec.
fn case_ii() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let wb = workbench(dir.path());
    let sid = wb.create_session(SessionConfig::default()).unwrap().session_id;
    let inputs = BTreeMap::from([("spec_document".to_string(), upload_fixture(&wb, "specs/neorv32_mini.md"))]);
    let reply =
        wb.run_agent(&sid, AgentKind::AssetIdentification, inputs, &mut Vec::new()).map_err(|e| e.to_string())?;
    let json = wb.store().read_artifact_text(&artifact(&reply, "assets_neorv32_mini.json")?.artifact_id).unwrap();
    let v: Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let ips = v.as_array().ok_or("top level is not a list")?;
    let mut seen = BTreeSet::new();
    let mut n = 0;
    for ip in ips {
        let keys: Vec<&str> = ip.as_object().ok_or("IP entry is not an object")?.keys().map(String::as_str).collect();
        ensure!(keys == ["IP", "Assets"], "IP keys {keys:?}");
        let name = ip["IP"].as_str().ok_or("IP is not a string")?;
        seen.insert(name.to_string());
        for a in ip["Assets"].as_array().ok_or("Assets is not a list")? {
            let keys: Vec<&str> = a.as_object().ok_or("asset is not an object")?.keys().map(String::as_str).collect();
            ensure!(
                keys == ["Asset_Name", "Functionality", "Security Objective", "Justification"],
                "asset keys {keys:?}"
            );
            for k in &keys {
                ensure!(a[*k].as_str().is_some_and(|s| !s.trim().is_empty()), "{k} is empty in {a}");
            }
            let objective = a["Security Objective"].as_str().unwrap();
            ensure!(["Confidentiality", "Integrity", "Availability"].contains(&objective), "objective {objective:?}");
            n += 1;
        }
    }
    // The fixture describes three functional modules and two structural
    // ones (top-level wrapper, package) that hold no assets.
    let pruned = ["neorv32_top", "neorv32_package"];
    ensure!(pruned.iter().all(|p| !seen.contains(*p)), "assets attributed to pruned modules: {seen:?}");
    let functional: BTreeSet<String> = ["neorv32_trng", "neorv32_uart", "neorv32_wdt"].map(String::from).into();
    ensure!(seen == functional, "IPs {seen:?}");
    Ok(format!("{n} assets over {} IPs, schema keys exact, objectives in CIA", seen.len()))
}

// Intent routing over the fixture table.
fn routing() -> Outcome {
    let mock = Arc::new(MockBackend::from_dir(fixtures().join("mock/routing")).unwrap());
    let gateway = Gateway::with_builtin_templates().with_backend("mock", mock);
    let table = text("routing/queries.tsv");
    let mut total = 0;
    let mut agree = 0;
    let mut misses = Vec::new();
    for line in table.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        let (expected, atts, query) = (cols[0], cols[1], cols[2]);
        let attachments: Vec<ArtifactRef> = atts
            .split(',')
            .filter(|k| *k != "-")
            .map(|k| ArtifactRef {
                artifact_id: svw_core::new_id(),
                kind: k.parse::<ArtifactKind>().unwrap(),
                filename: format!("upload.{k}"),
                byte_length: 1,
            })
            .collect();
        total += 1;
        let got = match detect_intent(&gateway, "mock", query, &attachments) {
            Ok(i) if !i.in_domain => {
                build_plan(&i, BTreeMap::new()).map_or("off_domain".to_string(), |_| "planned".into())
            }
            Ok(i) => i.primary().as_str().to_string(),
            Err(e) => format!("error: {e}"),
        };
        if got == expected {
            agree += 1;
        } else {
            misses.push(format!("{query:?} -> {got}"));
        }
    }
    ensure!(total == 30, "{total} queries in the table");
    ensure!(misses.is_empty(), "{} misroutes: {}", misses.len(), misses.join("; "));
    Ok(format!("{agree}/{total} agree"))
}

fn brute_force(entries: &[(String, Vec<f32>)], q: &[f32], k: usize) -> Vec<(String, f64)> {
    let norm = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = entries
        .iter()
        .filter(|(_, v)| v.iter().any(|x| *x != 0.0))
        .map(|(id, v)| {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
            (id.clone(), (dot / (norm(v) * norm(q))).clamp(-1.0, 1.0))
        })
        .collect();
    // ties break on the smaller chunk id
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

// Exact top-k retrieval against a brute-force cosine sort.
fn rag() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut ties = 0;
    for round in 0..200 {
        let dims = rng.gen_range(2..16);
        let n = rng.gen_range(1..=1000);
        let k = rng.gen_range(1..=20);
        let mut store = VectorStore::new("s", "s", dims, "test");
        let mut entries = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for id in order {
            // small integer components make exact ties common
            let raw: Vec<f64> = (0..dims).map(|_| f64::from(rng.gen_range(-2i8..=2))).collect();
            let v = EmbeddingVector::from_f64(&raw);
            let chunk = KnowledgeChunk {
                chunk_id: format!("c{id:05}"),
                source_doc: "rand".into(),
                ordinal: id,
                text: String::new(),
                token_estimate: 0,
            };
            entries.push((chunk.chunk_id.clone(), v.values.clone()));
            store.insert(chunk, v).map_err(|e| e.to_string())?;
        }
        let mut q: Vec<f64> = (0..dims).map(|_| f64::from(rng.gen_range(-2i8..=2))).collect();
        if q.iter().all(|x| *x == 0.0) {
            q[0] = 1.0;
        }
        let q = EmbeddingVector::from_f64(&q);
        let got: Vec<(String, f64)> =
            store.search(&q, k).map_err(|e| e.to_string())?.into_iter().map(|h| (h.chunk_id, h.score)).collect();
        let want = brute_force(&entries, &q.values, k);
        ties += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
        ensure!(got == want, "store {round} (n={n}, k={k}) differs: {got:?} vs {want:?}");
    }
    Ok(format!("200/200 stores agree, {ties} tied neighbours ordered by id"))
}

// Assertion checker on the listing, its mutations and random input.
fn sva_checker() -> Outcome {
    let table = parse_ports(&text("designs/uart_dma_top.v")).unwrap();
    let listing = text("sva/uart_dma_top.sva");
    let base: Vec<&str> = listing.split_inclusive(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    ensure!(base.len() == 4, "{} assertions in the fixture", base.len());
    for a in &base {
        check_sva(a, &table).map_err(|d| format!("rejected {a}: {d:?}"))?;
    }
    let mut rejected = 0;
    for line in text("sva/mutations.tsv").lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let i: usize = cols[0].parse().unwrap();
        ensure!(base[i].contains(cols[1]), "mutation {line:?} does not apply");
        let mutated = base[i].replacen(cols[1], cols[2], 1);
        let Err(d) = check_sva(&mutated, &table) else {
            return Err(format!("accepted mutation {mutated}"));
        };
        let named = format!("\"{}\"", cols[3]);
        ensure!(d.iter().any(|x| x.message.contains(&named)), "{mutated}: no diagnostic names {named}: {d:?}");
        rejected += 1;
    }
    ensure!(rejected == 20, "{rejected} mutations");

    let pieces = [
        "assert",
        "property",
        "(",
        ")",
        "@",
        "posedge",
        "negedge",
        "clk",
        "disable",
        "iff",
        "!",
        "rst_n",
        "|->",
        "|=>",
        "&&",
        "||",
        "==",
        "!=",
        "dbg_en",
        "csr_q",
        ".",
        "dma_prio",
        "[",
        "]",
        ":",
        "3'b101",
        "32'hDEAD",
        "$past",
        "$rose",
        ",",
        ";",
        "endproperty",
        "?",
        "{",
        "}",
        "'",
        "\"",
        "//",
        "/*",
        "*/",
        "\n",
        " ",
        "##1",
        "[*2]",
        "`define",
    ];
    let mut rng = rand::rngs::StdRng::seed_from_u64(0xf022);
    let mut panics = 0;
    let mut accepted = 0;
    for _ in 0..10_000 {
        let s: String = if rng.gen_bool(0.5) {
            (0..rng.gen_range(0..40)).map(|_| pieces[rng.gen_range(0..pieces.len())]).collect::<Vec<_>>().join(" ")
        } else {
            (0..rng.gen_range(0..120)).map(|_| char::from(rng.gen_range(0x20u8..0x7f))).collect()
        };
        match std::panic::catch_unwind(|| check_sva(&s, &table)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
            Err(_) => panics += 1,
        }
    }
    ensure!(panics == 0, "{panics} panics on fuzz input");
    Ok(format!("4/4 accepted, 20/20 mutations rejected naming the token, 10000 fuzz inputs without a crash ({accepted} accepted)"))
}

/// Step `flaky` fails transiently `failures` times, then succeeds.
struct Flaky {
    failures: u32,
    calls: AtomicU32,
}

impl StepRunner for Flaky {
    fn run(&self, call: &StepCall<'_>) -> StepOutcome {
        if call.step.name != "flaky" {
            return StepOutcome::Ok(Value::from(call.step.name.clone()));
        }
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            StepOutcome::Retryable(format!("timeout {n}"))
        } else {
            StepOutcome::Ok(Value::from("done"))
        }
    }
}

fn threat_inputs() -> BTreeMap<String, ResolvedInput> {
    BTreeMap::from([
        (
            "spec_document".to_string(),
            ResolvedInput {
                filename: Some("neorv32_mini.md".into()),
                text: text("specs/neorv32_mini.md"),
            },
        ),
        (
            "asset_json".to_string(),
            ResolvedInput {
                filename: Some("assets.json".into()),
                text: r#"[{"IP":"neorv32_trng","Assets":[{"Asset_Name":"entropy output","Functionality":"Random numbers","Security Objective":"Confidentiality","Justification":"Keys derive from it"}]}]"#.into(),
            },
        ),
    ])
}

fn threat_run(
    answers: BTreeMap<String, String>,
    interrupt: bool,
) -> Result<(Vec<u8>, BTreeMap<String, String>, usize), String> {
    let mock = Arc::new(MockBackend::from_dir(fixtures().join("mock/threat")).unwrap());
    let gateway = Arc::new(Gateway::with_builtin_templates().with_backend("mock", mock));
    let work = tempfile::tempdir().unwrap();
    let resources = Resources::bundled(
        Box::new(svw_agents::bugvalidate::MockSimulator::new(fixtures().join("traces"))),
        work.path().to_path_buf(),
    );
    let runner = AgentRunner { env: AgentEnv::new(gateway, &SessionConfig::default()), resources: &resources };
    let inputs = threat_inputs();
    let mut st = ExecutionState::new(TaskPlan {
        plan_id: "0123456789abcdef0123456789abcdef".into(),
        agent: AgentKind::ThreatModeling,
        steps: pipeline(AgentKind::ThreatModeling),
        inputs: BTreeMap::new(),
    });
    if !interrupt {
        st.answers = answers.clone();
    }
    let mut out = Orchestrator::new(&runner).execute(&mut st, &inputs).map_err(|e| e.to_string())?;
    let mut suspensions = 0;
    while let RunOutcome::Suspended(reqs) = out {
        suspensions += 1;
        // the checkpoint is all that survives between requests
        st = serde_json::from_str(&serde_json::to_string(&st).unwrap()).unwrap();
        let supplied = reqs.iter().map(|r| (r.name.clone(), format!("answer to {}", r.name))).collect();
        out = Orchestrator::new(&runner).resume(&mut st, &supplied, &inputs).map_err(|e| e.to_string())?;
    }
    ensure!(out == RunOutcome::Completed, "run ended {out:?}");
    Ok((serde_json::to_vec(&st.outputs).unwrap(), st.answers, suspensions))
}

// Retry accounting and suspend/resume equivalence.
fn orchestrator() -> Outcome {
    let plan = TaskPlan {
        plan_id: "0123456789abcdef0123456789abcdef".into(),
        agent: AgentKind::SecurityQa,
        steps: vec![
            StepSpec::new("first", &[], "a"),
            StepSpec::new("flaky", &["a"], "b"),
            StepSpec::new("last", &["b"], "c"),
        ],
        inputs: BTreeMap::new(),
    };
    for retries in 0..=3u32 {
        for failures in 0..=retries + 1 {
            let r = Flaky { failures, calls: AtomicU32::new(0) };
            let mut st = ExecutionState::new(plan.clone());
            let out = Orchestrator::new(&r)
                .limits(Limits { retries, ..Limits::default() })
                .execute(&mut st, &BTreeMap::new())
                .map_err(|e| e.to_string())?;
            let calls = r.calls.load(Ordering::SeqCst);
            if failures <= retries {
                ensure!(out == RunOutcome::Completed, "retries={retries} failures={failures}: {out:?}");
                ensure!(calls == failures + 1, "retries={retries} failures={failures}: {calls} calls");
            } else {
                ensure!(
                    matches!(&out, RunOutcome::Failed { step, .. } if step == "flaky"),
                    "retries={retries} failures={failures}: {out:?}"
                );
                ensure!(calls == retries + 1, "retries={retries}: {calls} calls before giving up");
                ensure!(!st.outputs.contains_key("c"), "step after the failure ran");
            }
        }
    }
    let (interrupted, answers, suspensions) = threat_run(BTreeMap::new(), true)?;
    ensure!(suspensions >= 2, "{suspensions} suspensions");
    let (straight, _, none) = threat_run(answers, false)?;
    ensure!(none == 0, "preloaded run suspended");
    ensure!(interrupted == straight, "resumed outputs differ from the uninterrupted run");
    Ok(format!(
        "retry budget exact for 0..=3 retries, {suspensions} suspensions resumed to {} identical output bytes",
        straight.len()
    ))
}

// Bug-validated rate over a scripted batch.
fn metric() -> Outcome {
    let table = parse_ports(&text("designs/Authentication_Bypass.v")).unwrap();
    let mut cases = Vec::new();
    for line in text("metric/batch.tsv").lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        let trace = parse_trace(&text(&format!("traces/{}", cols[1]))).map_err(|e| e.to_string())?;
        let roi = parse_roi(cols[2])?;
        cases.push((cols[0].to_string(), validate(&trace, &roi, Some(&table), 0)));
    }
    let report = metric_report(&cases).map_err(|e| e.to_string())?;
    ensure!(report.cases.len() == 10, "{} cases", report.cases.len());
    ensure!(report.rate.value == 0.8, "rate {}", report.rate.value);
    ensure!(report.rate.rational == "8/10", "rational {}", report.rate.rational);
    let m = report.count(VerdictOutcome::Match);
    let f = report.count(VerdictOutcome::FailedActivation);
    let i = report.count(VerdictOutcome::IncompleteDefinition);
    ensure!(m + f + i == 10 && m == 8, "{m} match, {f} failed_activation, {i} incomplete_definition");
    ensure!(f == 1 && i == 1, "{f} failed_activation, {i} incomplete_definition");
    let names: Vec<&str> = report.cases.iter().map(|c| c.case.as_str()).collect();
    ensure!(names.first() == Some(&"c01") && names.last() == Some(&"c10"), "case order {names:?}");
    Ok(format!(
        "rate {} ({}), verdicts {m} match / {f} failed_activation / {i} incomplete_definition",
        report.rate.value, report.rate.rational
    ))
}

/// Replaces each distinct 32-hex identifier with its order of appearance.
fn normalize_ids(text: &str) -> String {
    let re = regex::Regex::new(r"\b[0-9a-f]{32}\b").unwrap();
    let mut seen: Vec<String> = Vec::new();
    re.replace_all(text, |c: &regex::Captures| {
        let id = c[0].to_string();
        let n = seen.iter().position(|s| *s == id).unwrap_or_else(|| {
            seen.push(id);
            seen.len() - 1
        });
        format!("<id{n}>")
    })
    .into_owned()
}

/// Runs a multi-turn fixture script. With `restart`, every request goes to
/// a freshly started service over the same data directory.
async fn script(dir: &Path, restart: bool) -> Result<(String, usize), String> {
    let cfg = service_config(dir);
    let mut app = common::app(&cfg);
    let sid = new_session(&app).await;
    let transcript = dir.join("sessions").join(&sid).join("transcript.ndjson");
    let restarts = std::cell::Cell::new(0);
    let step = |app: &mut axum::Router| -> Result<(), String> {
        if restart {
            restarts.set(restarts.get() + 1);
            let before = std::fs::read(&transcript).unwrap_or_default();
            *app = common::app(&cfg);
            ensure!(std::fs::read(&transcript).unwrap_or_default() == before, "restart changed the transcript");
        }
        Ok(())
    };
    step(&mut app)?;
    let (_, spec) = upload(&app, &sid, "neorv32_mini.md", &read("specs/neorv32_mini.md"), None).await;
    let spec = spec["artifact_id"].as_str().ok_or("spec upload failed")?.to_string();
    step(&mut app)?;
    let ev = message(&app, &sid, "Identify the security assets in the attached NEORV32 specification.", &[&spec]).await;
    let assets = ev
        .iter()
        .find(|e| e["type"] == "artifact_ready" && e["artifact"]["kind"] == "asset_json")
        .ok_or("no asset artifact")?["artifact"]["artifact_id"]
        .as_str()
        .unwrap()
        .to_string();
    let turns = [
        ("Build a threat model for the SoC using the spec and the asset list.", vec![spec.clone(), assets]),
        ("threat_r0_q0: only in our own lab", vec![]),
        ("threat_r0_q1: yes, from a third-party fab", vec![]),
        ("testing_infrastructure: logic analyzer, simulator\nbudget: 20k USD\ntimeline: 6 weeks", vec![]),
        ("What is hardware fuzzing and how does it find bugs in processors?", vec![]),
    ];
    let mut last = Vec::new();
    for (text, atts) in &turns {
        step(&mut app)?;
        let refs: Vec<&str> = atts.iter().map(String::as_str).collect();
        last = message(&app, &sid, text, &refs).await;
    }
    ensure!(last.last().is_some_and(|e| e["type"] == "answer"), "last turn: {last:?}");
    step(&mut app)?;
    let (_, fb) =
        stream(&app, &format!("/api/sessions/{sid}/feedback"), serde_json::json!({"text": "Make it shorter"})).await;
    ensure!(fb.last().is_some_and(|e| e["type"] == "answer"), "feedback: {fb:?}");
    let t = std::fs::read_to_string(&transcript).map_err(|e| e.to_string())?;
    Ok((normalize_ids(&t), restarts.get()))
}

// Upload/download fidelity and restart-independence of the service.
fn service(rt: &tokio::runtime::Runtime) -> Outcome {
    rt.block_on(async {
        let dir = tempfile::tempdir().unwrap();
        let app = common::app(&service_config(dir.path()));
        let sid = new_session(&app).await;
        let mut rng = rand::rngs::StdRng::seed_from_u64(0xb10b);
        let exts = ["bin", "v", "json", "sva", "md", "txt", "log"];
        for i in 0..100 {
            let len = if i == 0 { 1 } else { rng.gen_range(1..=64 * 1024) };
            let blob: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let name = format!("blob{i}.{}", exts[rng.gen_range(0..exts.len())]);
            let (s, v) = upload(&app, &sid, &name, &blob, None).await;
            ensure!(s == StatusCode::CREATED, "upload {i}: {s} {v}");
            let id = v["artifact_id"].as_str().unwrap();
            let (s, headers, bytes) = download(&app, id).await;
            ensure!(s == StatusCode::OK, "download {i}: {s}");
            ensure!(bytes.as_ref() == blob.as_slice(), "blob {i} ({len} bytes, {name}) changed in transit");
            ensure!(headers[header::CONTENT_TYPE] == svw_service::api::content_type(&name), "content type for {name}");
        }
        let steady = tempfile::tempdir().unwrap();
        let restarted = tempfile::tempdir().unwrap();
        let (a, _) = script(steady.path(), false).await?;
        let (b, restarts) = script(restarted.path(), true).await?;
        ensure!(a == b, "transcripts differ:\n{a}\n---\n{b}");
        Ok(format!(
            "100/100 blobs byte-identical, {}-turn transcript unchanged by {restarts} restarts",
            a.lines().count()
        ))
    })
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("bug validation reproduces the 45 ns ROI match", Box::new(case_v)),
        ("property generation for uart_dma_top", Box::new(case_iii)),
        ("asset identification schema and pruning", Box::new(case_ii)),
        ("routing suite", Box::new(routing)),
        ("retrieval equals brute force", Box::new(rag)),
        ("SVA checker", Box::new(sva_checker)),
        ("orchestrator contracts", Box::new(orchestrator)),
        ("metric harness", Box::new(metric)),
        ("service round-trips", Box::new(|| service(&rt))),
    ];
    // quiet the default hook so fuzzing does not spam; failures are reported below
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
