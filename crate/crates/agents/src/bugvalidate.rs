//! Simulation-based bug validation: scenario drafting with a critic,
//! testbench generation, simulation and region-of-interest verdicts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use svw_hdl::{check_testbench_syntax, has_errors, Direction, LogicValue, SignalTable};
use svw_llm::ChatRequest;

use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::text::strip_fence;

pub const SCENARIO_ROUNDS: usize = 3;
pub const TESTBENCH_ROUNDS: usize = 3;
/// Half period of the generated clock, in ns.
pub const HALF_PERIOD_NS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioAction {
    SetSignal { name: String, value: String },
    AssertReset,
    ReleaseReset,
    Observe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub time_ns: u64,
    pub actions: Vec<ScenarioAction>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub time_ns: u64,
    /// Signal name → expected value literal (or parameter name).
    pub expected: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestScenario {
    pub events: Vec<ScenarioEvent>,
    pub monitor_points: Vec<String>,
    pub roi: RegionOfInterest,
}

/// `roi: @45 sig=val sig=val`, with or without the label.
pub fn parse_roi(text: &str) -> Result<RegionOfInterest, String> {
    let t = text.trim();
    let t = t.strip_prefix("roi:").unwrap_or(t).trim();
    let t = t.strip_prefix('@').ok_or_else(|| format!("region of interest must start with @<time>: {text:?}"))?;
    let mut parts = t.split_whitespace();
    let time = parts.next().unwrap_or("");
    let time_ns = time.trim_end_matches("ns").parse().map_err(|_| format!("bad region-of-interest time {time:?}"))?;
    let mut expected = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("expected signal=value, got {p:?}"))?;
        if k.is_empty() || v.is_empty() {
            return Err(format!("expected signal=value, got {p:?}"));
        }
        expected.insert(k.to_string(), v.to_string());
    }
    Ok(RegionOfInterest { time_ns, expected })
}

fn parse_action(s: &str) -> Result<ScenarioAction, String> {
    let s = s.trim();
    match s {
        "assert_reset" => return Ok(ScenarioAction::AssertReset),
        "release_reset" => return Ok(ScenarioAction::ReleaseReset),
        "observe" => return Ok(ScenarioAction::Observe),
        _ => {}
    }
    let (k, v) = s.split_once('=').ok_or_else(|| format!("unrecognized action {s:?}"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(format!("unrecognized action {s:?}"));
    }
    Ok(ScenarioAction::SetSignal { name: k.to_string(), value: v.to_string() })
}

/// Parses the scenario reply grammar. Unrelated prose lines are ignored.
pub fn parse_scenario(text: &str) -> Result<TestScenario, Vec<String>> {
    let mut events = Vec::new();
    let mut monitor = Vec::new();
    let mut roi = None;
    let mut problems = Vec::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        if let Some(m) = line.strip_prefix("monitor:") {
            monitor.extend(m.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string));
        } else if line.starts_with("roi:") {
            match parse_roi(line) {
                Ok(r) => roi = Some(r),
                Err(e) => problems.push(e),
            }
        } else if let Some(rest) = line.strip_prefix('@') {
            let (body, note) = rest.split_once('#').map(|(b, n)| (b, n.trim())).unwrap_or((rest, ""));
            let (time, actions) = body.trim().split_once(char::is_whitespace).unwrap_or((body.trim(), ""));
            let Ok(time_ns) = time.trim_end_matches("ns").parse::<u64>() else {
                problems.push(format!("bad event time {time:?}"));
                continue;
            };
            let mut acts = Vec::new();
            for a in actions.split(';').filter(|a| !a.trim().is_empty()) {
                match parse_action(a) {
                    Ok(x) => acts.push(x),
                    Err(e) => problems.push(e),
                }
            }
            if acts.is_empty() {
                problems.push(format!("event at {time_ns} ns has no action"));
            }
            events.push(ScenarioEvent { time_ns, actions: acts, note: note.to_string() });
        }
    }
    let Some(roi) = roi else {
        problems.push("missing roi: line".into());
        return Err(problems);
    };
    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(TestScenario { events, monitor_points: monitor, roi })
}

pub fn render_scenario(s: &TestScenario) -> String {
    let mut out = String::new();
    for e in &s.events {
        let acts: Vec<String> = e
            .actions
            .iter()
            .map(|a| match a {
                ScenarioAction::SetSignal { name, value } => format!("{name}={value}"),
                ScenarioAction::AssertReset => "assert_reset".into(),
                ScenarioAction::ReleaseReset => "release_reset".into(),
                ScenarioAction::Observe => "observe".into(),
            })
            .collect();
        let _ = write!(out, "@{} {}", e.time_ns, acts.join(" ; "));
        if !e.note.is_empty() {
            let _ = write!(out, " # {}", e.note);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "monitor: {}", s.monitor_points.join(", "));
    let roi: Vec<String> = s.roi.expected.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(out, "roi: @{} {}", s.roi.time_ns, roi.join(" "));
    out
}

fn resolves(table: &SignalTable, value: &str) -> bool {
    LogicValue::parse(value).is_ok() || table.parameter(value).is_some() || table.is_signal(value)
}

#[derive(Debug, Default)]
struct ScenarioCheck {
    unknown: Vec<String>,
    problems: Vec<String>,
}

/// Local invariants: increasing times, existing signals, drivable inputs,
/// resolvable values and a non-empty region of interest. ROI signals are
/// added to the monitor list.
fn check_scenario(s: &mut TestScenario, table: &SignalTable) -> ScenarioCheck {
    let mut c = ScenarioCheck::default();
    let unknown = |name: &str, c: &mut ScenarioCheck| {
        if !table.is_signal(name) && !c.unknown.iter().any(|u| u == name) {
            c.unknown.push(name.to_string());
            c.problems.push(format!("unknown signal {name}"));
        }
    };
    for w in s.events.windows(2) {
        if w[1].time_ns <= w[0].time_ns {
            c.problems.push(format!("event times not strictly increasing: {} then {}", w[0].time_ns, w[1].time_ns));
        }
    }
    let clock = table.clock().map(str::to_string);
    for e in &s.events {
        for a in &e.actions {
            match a {
                ScenarioAction::SetSignal { name, value } => {
                    unknown(name, &mut c);
                    if table.is_signal(name) {
                        let input = table.port(name).is_some_and(|p| p.direction == Direction::Input);
                        if !input {
                            c.problems.push(format!("{name} is not an input and cannot be driven"));
                        } else if clock.as_deref() == Some(name.as_str()) {
                            c.problems.push(format!("{name} is the clock and is driven by the testbench"));
                        }
                    }
                    if !resolves(table, value) {
                        c.problems.push(format!("value {value:?} for {name} is not a literal, parameter or signal"));
                    }
                }
                ScenarioAction::AssertReset | ScenarioAction::ReleaseReset if table.reset().is_none() => {
                    c.problems.push("design has no reset input".into());
                }
                _ => {}
            }
        }
    }
    for m in s.monitor_points.clone() {
        unknown(&m, &mut c);
    }
    if s.roi.expected.is_empty() {
        c.problems.push("region of interest expects no signals".into());
    }
    for (k, v) in &s.roi.expected {
        unknown(k, &mut c);
        if LogicValue::parse(v).is_err() && table.parameter_value(v).is_none() {
            c.problems.push(format!("expected value {v:?} for {k} is not a literal or parameter"));
        }
    }
    for k in s.roi.expected.keys() {
        if !s.monitor_points.contains(k) {
            s.monitor_points.push(k.clone());
        }
    }
    c
}

pub fn signal_listing(table: &SignalTable) -> String {
    let mut s = String::new();
    for p in &table.ports {
        let _ = writeln!(s, "{} {} [{}]", p.name, p.direction.as_str(), p.width);
    }
    for r in &table.registers {
        let _ = writeln!(s, "{} reg [{}]", r.name, r.width);
    }
    s
}

fn parameter_listing(table: &SignalTable) -> String {
    if table.parameters.is_empty() {
        return "(none)".into();
    }
    table.parameters.iter().map(|p| format!("{} = {}\n", p.name, p.value)).collect()
}

/// Drafts a scenario and refines it with the critic, at most three rounds.
pub fn generate_scenario(env: &AgentEnv, table: &SignalTable, bug: &str) -> Result<TestScenario, AgentError> {
    if bug.trim().is_empty() {
        return Err(AgentError::Precondition("bug description is empty".into()));
    }
    let signals = signal_listing(table);
    let mut feedback = "(none)".to_string();
    let mut last = ScenarioCheck::default();
    let mut fallback = None;
    for round in 1..=SCENARIO_ROUNDS {
        let reply = env.complete(
            &ChatRequest::new("scenario_draft")
                .var("module", &table.module_name)
                .var("signals", &signals)
                .var("parameters", parameter_listing(table))
                .var("bug", bug)
                .var("feedback", &feedback)
                .max_tokens(768),
        )?;
        let mut scenario = match parse_scenario(&reply.text) {
            Ok(s) => s,
            Err(problems) => {
                last = ScenarioCheck { unknown: vec![], problems };
                feedback = last.problems.join("\n");
                continue;
            }
        };
        last = check_scenario(&mut scenario, table);
        if !last.problems.is_empty() {
            feedback = last.problems.join("\n");
            continue;
        }
        let critic = env.complete(
            &ChatRequest::new("scenario_critic")
                .var("bug", bug)
                .var("signals", &signals)
                .var("scenario", render_scenario(&scenario))
                .max_tokens(256),
        )?;
        let verdict = critic.text.trim();
        if verdict.to_ascii_lowercase().starts_with("accept") {
            return Ok(scenario);
        }
        tracing::debug!(round, "critic asked for a revision");
        feedback = verdict.strip_prefix("revise:").unwrap_or(verdict).trim().to_string();
        fallback = Some(scenario);
    }
    if let Some(s) = fallback.filter(|_| last.problems.is_empty()) {
        tracing::warn!("critic did not accept the scenario; using the last valid draft");
        return Ok(s);
    }
    Err(AgentError::Scenario { rounds: SCENARIO_ROUNDS, unknown_signals: last.unknown, problems: last.problems })
}

fn value_expr(table: &SignalTable, value: &str) -> String {
    // Parameters are not visible from the testbench.
    match table.parameter(value) {
        Some(p) => table.parameter_value(&p.name).map(|v| v.to_binary_literal()).unwrap_or_else(|| p.value.clone()),
        None => value.to_string(),
    }
}

/// Deterministic testbench: declarations, DUT instance, clock, reset
/// initialization, the scenario's stimulus and a `$strobe` line per
/// positive clock edge.
pub fn testbench_skeleton(table: &SignalTable, scenario: &TestScenario) -> String {
    let m = &table.module_name;
    let clock = table.clock().unwrap_or("clk").to_string();
    let reset = table.reset().map(|(n, low)| (n.to_string(), low));
    let mut s = String::from("`timescale 1ns/1ps\n");
    let _ = writeln!(s, "module {m}_TB;");
    let decl = |w: u32| if w > 1 { format!(" [{}:0]", w - 1) } else { String::new() };
    for p in &table.ports {
        let kind = if p.direction == Direction::Input { "reg" } else { "wire" };
        let _ = writeln!(s, "    {kind}{} {};", decl(p.width), p.name);
    }
    let conns: Vec<String> = table.ports.iter().map(|p| format!("        .{0}({0})", p.name)).collect();
    let _ = writeln!(s, "    {m} uut (\n{}\n    );", conns.join(",\n"));
    let _ = writeln!(s, "    always #{HALF_PERIOD_NS} {clock} = ~{clock};");
    s.push_str("    initial begin\n");
    let _ = writeln!(s, "        {clock} = 0;");
    for p in table.ports.iter().filter(|p| p.direction == Direction::Input && p.name != clock) {
        match &reset {
            Some((r, low)) if *r == p.name => {
                let _ = writeln!(s, "        {r} = {};", if *low { 0 } else { 1 });
            }
            _ => {
                let _ = writeln!(s, "        {} = 0;", p.name);
            }
        }
    }
    let mut now = 0;
    for e in &scenario.events {
        let delta = e.time_ns - now.min(e.time_ns);
        now = e.time_ns;
        let mut stmts = Vec::new();
        for a in &e.actions {
            match (a, &reset) {
                (ScenarioAction::SetSignal { name, value }, _) => {
                    stmts.push(format!("{name} = {};", value_expr(table, value)))
                }
                (ScenarioAction::AssertReset, Some((r, low))) => {
                    stmts.push(format!("{r} = {};", if *low { 0 } else { 1 }))
                }
                (ScenarioAction::ReleaseReset, Some((r, low))) => {
                    stmts.push(format!("{r} = {};", if *low { 1 } else { 0 }))
                }
                _ => {}
            }
        }
        let note = if e.note.is_empty() { String::new() } else { format!(" // {}", e.note) };
        if stmts.is_empty() {
            let _ = writeln!(s, "        #{delta};{note}");
        } else {
            let _ = writeln!(s, "        #{delta} {}{note}", stmts.join(" "));
        }
    }
    let end = scenario.roi.time_ns.max(now) + 4 * HALF_PERIOD_NS - now;
    let _ = writeln!(s, "        #{end} $finish;");
    s.push_str("    end\n");
    let mut fmt = String::from("Time=%0t");
    let mut args = vec!["$time".to_string()];
    for sig in &scenario.monitor_points {
        let w = table.width_of(sig).unwrap_or(1);
        let spec = if w <= 4 { format!("{w}'b%b") } else { format!("{w}'h%h") };
        let _ = write!(fmt, " {sig}={spec}");
        let is_port = table.port(sig).is_some();
        args.push(if is_port { sig.clone() } else { format!("uut.{sig}") });
    }
    let _ = writeln!(s, "    always @(posedge {clock}) begin");
    let _ = writeln!(s, "        $strobe(\"{fmt}\", {});", args.join(", "));
    s.push_str("    end\nendmodule\n");
    s
}

/// Syntax problems plus any monitored signal missing from the logging
/// statements.
pub fn testbench_problems(src: &str, table: &SignalTable, scenario: &TestScenario) -> Vec<String> {
    let diags = check_testbench_syntax(src, Some(table));
    let mut out: Vec<String> =
        if has_errors(&diags) { diags.iter().map(|d| d.render("tb.v")).collect() } else { Vec::new() };
    let logging: String =
        src.lines().filter(|l| l.contains("$strobe") || l.contains("$display") || l.contains("$monitor")).collect();
    if !logging.contains("Time=") {
        out.push("no $strobe line in the Time=<t> name=value format".into());
    }
    for m in &scenario.monitor_points {
        if !logging.contains(&format!("{m}=")) {
            out.push(format!("monitor signal {m} is not logged"));
        }
    }
    out
}

/// One generation round. `feedback` holds the problem lists of previous
/// rounds. Returns the source, or the problems found in it.
pub fn testbench_round(
    env: &AgentEnv,
    table: &SignalTable,
    scenario: &TestScenario,
    feedback: &[String],
) -> Result<Result<String, Vec<String>>, AgentError> {
    let reply = env.complete(
        &ChatRequest::new("testbench_generate")
            .var("module", &table.module_name)
            .var("scenario", render_scenario(scenario))
            .var("skeleton", testbench_skeleton(table, scenario))
            .var("feedback", feedback.last().map(String::as_str).unwrap_or("(none)"))
            .max_tokens(2048),
    )?;
    let src = strip_fence(&reply.text);
    let problems = testbench_problems(&src, table, scenario);
    Ok(if problems.is_empty() { Ok(src) } else { Err(problems) })
}

pub fn generate_testbench(env: &AgentEnv, table: &SignalTable, scenario: &TestScenario) -> Result<String, AgentError> {
    let mut feedback = Vec::new();
    for _ in 0..TESTBENCH_ROUNDS {
        match testbench_round(env, table, scenario, &feedback)? {
            Ok(src) => return Ok(src),
            Err(p) => feedback.push(p.join("\n")),
        }
    }
    Err(AgentError::Testbench {
        rounds: TESTBENCH_ROUNDS,
        diagnostics: feedback.last().map(|f| f.lines().map(str::to_string).collect()).unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ns: u64,
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub records: Vec<TraceRecord>,
}

/// Reads `Time=<t> name=value ...` lines; everything else is simulator
/// chatter and skipped. Hierarchical prefixes are dropped from names.
pub fn parse_trace(log: &str) -> Result<SimulationTrace, AgentError> {
    let mut records: Vec<TraceRecord> = Vec::new();
    for (i, line) in log.lines().enumerate() {
        let n = i + 1;
        let Some(rest) = line.trim().strip_prefix("Time=") else {
            continue;
        };
        let bad = |reason: String| AgentError::TraceFormat { line: n, reason };
        let mut parts = rest.split_whitespace();
        let t = parts.next().ok_or_else(|| bad("missing time value".into()))?;
        let time_ns: u64 = t.parse().map_err(|_| bad(format!("time {t:?} is not a decimal number")))?;
        let mut values = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("expected name=value, got {p:?}")))?;
            let k = k.rsplit('.').next().unwrap_or(k);
            if k.is_empty() {
                return Err(bad(format!("empty signal name in {p:?}")));
            }
            LogicValue::parse(v).map_err(|e| bad(e.to_string()))?;
            values.insert(k.to_string(), v.to_string());
        }
        if values.is_empty() {
            return Err(bad("record has no signal values".into()));
        }
        if let Some(prev) = records.last() {
            if prev.time_ns > time_ns {
                return Err(bad(format!("time goes backwards from {} to {time_ns}", prev.time_ns)));
            }
        }
        records.push(TraceRecord { time_ns, values });
    }
    Ok(SimulationTrace { records })
}

pub trait Simulator: Send + Sync {
    fn id(&self) -> &str;
    /// Runs `testbench` against `dut` with scratch files under `work`.
    fn simulate(&self, design: &str, dut: &str, testbench: &str, work: &Path) -> Result<SimulationTrace, AgentError>;
}

/// Replays `<dir>/<design>.log`.
#[derive(Debug, Clone)]
pub struct MockSimulator {
    pub dir: PathBuf,
}

impl MockSimulator {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Simulator for MockSimulator {
    fn id(&self) -> &str {
        "mock"
    }

    fn simulate(
        &self,
        design: &str,
        _dut: &str,
        _testbench: &str,
        _work: &Path,
    ) -> Result<SimulationTrace, AgentError> {
        let p = self.dir.join(format!("{design}.log"));
        let text = std::fs::read_to_string(&p)
            .map_err(|e| AgentError::Simulator(format!("no mock trace {}: {e}", p.display())))?;
        parse_trace(&text)
    }
}

/// Runs a shell command template with `{dut}`, `{tb}`, `{log}` and `{work}`
/// placeholders. The log is read from `{log}` if the command wrote it,
/// otherwise from standard output.
#[derive(Debug, Clone)]
pub struct ExternalSimulator {
    pub id: String,
    pub command: String,
}

impl Simulator for ExternalSimulator {
    fn id(&self) -> &str {
        &self.id
    }

    fn simulate(&self, _design: &str, dut: &str, testbench: &str, work: &Path) -> Result<SimulationTrace, AgentError> {
        std::fs::create_dir_all(work).map_err(|e| AgentError::io(work, e))?;
        let dut_path = work.join("dut.v");
        let tb_path = work.join("tb.v");
        let log_path = work.join("trace.log");
        std::fs::write(&dut_path, dut).map_err(|e| AgentError::io(&dut_path, e))?;
        std::fs::write(&tb_path, testbench).map_err(|e| AgentError::io(&tb_path, e))?;
        let _ = std::fs::remove_file(&log_path);
        let cmd = self
            .command
            .replace("{dut}", &dut_path.display().to_string())
            .replace("{tb}", &tb_path.display().to_string())
            .replace("{log}", &log_path.display().to_string())
            .replace("{work}", &work.display().to_string());
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .current_dir(work)
            .output()
            .map_err(|e| AgentError::Simulator(format!("cannot start {cmd:?}: {e}")))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        if !out.status.success() {
            return Err(AgentError::Simulator(format!(
                "{cmd:?} exited with {}\n{}{}",
                out.status,
                stdout,
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        let log = match std::fs::read_to_string(&log_path) {
            Ok(l) => l,
            Err(_) => stdout.into_owned(),
        };
        parse_trace(&log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictOutcome {
    Match,
    FailedActivation,
    IncompleteDefinition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalComparison {
    pub signal: String,
    pub expected: String,
    pub actual: Option<String>,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: VerdictOutcome,
    pub roi_time_ns: u64,
    pub record_time_ns: Option<u64>,
    pub detail: Vec<SignalComparison>,
}

impl Verdict {
    pub fn summary(&self) -> String {
        match self.outcome {
            VerdictOutcome::Match => {
                format!("All values matched the region of interest at time {} ns.", self.roi_time_ns)
            }
            VerdictOutcome::FailedActivation => {
                let diffs: Vec<String> = self
                    .detail
                    .iter()
                    .filter(|d| !d.equal)
                    .map(|d| format!("{} expected {} got {}", d.signal, d.expected, d.actual.as_deref().unwrap_or("-")))
                    .collect();
                format!("Bug not activated at {} ns: {}.", self.roi_time_ns, diffs.join(", "))
            }
            VerdictOutcome::IncompleteDefinition => match self.record_time_ns {
                None => format!("No trace record at {} ns.", self.roi_time_ns),
                Some(_) => {
                    let missing: Vec<&str> =
                        self.detail.iter().filter(|d| d.actual.is_none()).map(|d| d.signal.as_str()).collect();
                    format!("Signals not logged at {} ns: {}.", self.roi_time_ns, missing.join(", "))
                }
            },
        }
    }
}

fn expected_value(table: Option<&SignalTable>, text: &str) -> Option<LogicValue> {
    LogicValue::parse(text).ok().or_else(|| table?.parameter_value(text))
}

/// Compares the region of interest with the record at its time. With a
/// nonzero `window`, the nearest record within the window is used; among
/// records at the same time the last one wins.
pub fn validate(trace: &SimulationTrace, roi: &RegionOfInterest, table: Option<&SignalTable>, window: u64) -> Verdict {
    let record = trace
        .records
        .iter()
        .filter(|r| r.time_ns.abs_diff(roi.time_ns) <= window)
        .min_by_key(|r| (r.time_ns.abs_diff(roi.time_ns), std::cmp::Reverse(r.time_ns)))
        .map(|best| trace.records.iter().rev().find(|r| r.time_ns == best.time_ns).unwrap());
    let Some(record) = record else {
        return Verdict {
            outcome: VerdictOutcome::IncompleteDefinition,
            roi_time_ns: roi.time_ns,
            record_time_ns: None,
            detail: roi
                .expected
                .iter()
                .map(|(k, v)| SignalComparison { signal: k.clone(), expected: v.clone(), actual: None, equal: false })
                .collect(),
        };
    };
    let mut incomplete = roi.expected.is_empty();
    let mut mismatch = false;
    let mut detail = Vec::new();
    for (k, v) in &roi.expected {
        let actual = record.values.get(k).cloned();
        let width = table.and_then(|t| t.width_of(k)).map(|w| w as usize);
        let equal = match (&actual, expected_value(table, v)) {
            (Some(a), Some(e)) => LogicValue::parse(a).is_ok_and(|a| a.equivalent(&e, width)),
            _ => false,
        };
        if actual.is_none() || expected_value(table, v).is_none() {
            incomplete = true;
        } else if !equal {
            mismatch = true;
        }
        detail.push(SignalComparison { signal: k.clone(), expected: v.clone(), actual, equal });
    }
    let outcome = if incomplete {
        VerdictOutcome::IncompleteDefinition
    } else if mismatch {
        VerdictOutcome::FailedActivation
    } else {
        VerdictOutcome::Match
    };
    Verdict { outcome, roi_time_ns: roi.time_ns, record_time_ns: Some(record.time_ns), detail }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRate {
    pub matched: usize,
    pub total: usize,
    pub value: f64,
    /// Exact `matched/total`.
    pub rational: String,
}

pub fn validation_rate(verdicts: &[Verdict]) -> Result<ValidationRate, AgentError> {
    if verdicts.is_empty() {
        return Err(AgentError::Metric("validation rate of an empty result list".into()));
    }
    let matched = verdicts.iter().filter(|v| v.outcome == VerdictOutcome::Match).count();
    let total = verdicts.len();
    Ok(ValidationRate { matched, total, value: matched as f64 / total as f64, rational: format!("{matched}/{total}") })
}

/// One case of a scored batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case: String,
    pub outcome: VerdictOutcome,
    pub summary: String,
}

/// Validation rate over a batch with the verdict of every case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rate: ValidationRate,
    pub cases: Vec<CaseVerdict>,
}

impl MetricReport {
    pub fn count(&self, outcome: VerdictOutcome) -> usize {
        self.cases.iter().filter(|c| c.outcome == outcome).count()
    }
}

pub fn metric_report(cases: &[(String, Verdict)]) -> Result<MetricReport, AgentError> {
    let verdicts: Vec<Verdict> = cases.iter().map(|(_, v)| v.clone()).collect();
    Ok(MetricReport {
        rate: validation_rate(&verdicts)?,
        cases: cases
            .iter()
            .map(|(case, v)| CaseVerdict { case: case.clone(), outcome: v.outcome, summary: v.summary() })
            .collect(),
    })
}

/// Final artifact of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub design: String,
    pub bug: String,
    pub scenario: TestScenario,
    pub verdict: Verdict,
    pub summary: String,
}
