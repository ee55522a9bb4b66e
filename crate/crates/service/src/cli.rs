//! The `svw` command line: the HTTP server, chat, one verb per agent, the
//! SVA checker and the knowledge-store builder.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use svw_core::{AgentKind, ArtifactRef, InputValue, Requirement, RequirementKind, SessionConfig};
use svw_engine::{ApiMessage, EventSink, Reply, Workbench};
use svw_hdl::{check_sva_file, has_errors, parse_ports, SvaOptions};
use svw_knowledge::{build_from_manifest, HashEmbedder, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use svw_llm::RemoteConfig;

use crate::api::{serve, AppState};
use crate::config::{ServiceConfig, DEFAULT_MAX_UPLOAD, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "svw", version, about = "SoC security verification workbench")]
pub struct Cli {
    #[command(flatten)]
    pub env: EnvArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct EnvArgs {
    /// Sessions, artifacts and knowledge stores live here.
    #[arg(long, env = "SVW_DATA_DIR", default_value = "svw-data", global = true)]
    pub data_dir: PathBuf,
    /// Mock backend fixture directory.
    #[arg(long, env = "SVW_MOCK_FIXTURES", global = true)]
    pub mock_fixtures: Option<PathBuf>,
    /// Canned simulation logs, one `<design>.log` per design.
    #[arg(long, env = "SVW_MOCK_TRACES", global = true)]
    pub mock_traces: Option<PathBuf>,
    /// Canned web search results, one `<slug>.tsv` per query.
    #[arg(long, env = "SVW_SEARCH_FIXTURES", global = true)]
    pub search_fixtures: Option<PathBuf>,
    /// Simulator command with {dut}, {tb}, {log} and {work} placeholders.
    #[arg(long, env = "SVW_SIMULATOR", global = true)]
    pub simulator: Option<String>,
    /// Backend for new sessions (`mock` or `remote`).
    #[arg(long, global = true)]
    pub backend: Option<String>,
}

impl EnvArgs {
    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig {
            mock_fixtures: self.mock_fixtures.clone(),
            mock_traces: self.mock_traces.clone(),
            search_fixtures: self.search_fixtures.clone(),
            simulator: self.simulator.clone(),
            remote: RemoteConfig::from_env(),
            ..ServiceConfig::new(&self.data_dir)
        }
    }

    fn session_config(&self, svc: &ServiceConfig) -> SessionConfig {
        let mut c = svc.session_defaults();
        if let Some(b) = &self.backend {
            c.backend_id = b.clone();
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Answer to a question the agent may ask, as NAME=VALUE. Unanswered
    /// questions are prompted for on stdin.
    #[arg(long = "answer", value_name = "NAME=VALUE", value_parser = parse_answer)]
    pub answers: Vec<(String, String)>,
    /// Directory the produced files are written to.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print the event stream as NDJSON instead of the answer text.
    #[arg(long)]
    pub ndjson: bool,
}

fn parse_answer(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.to_string()))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "SVW_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        /// Upload size limit in bytes.
        #[arg(long, env = "SVW_MAX_UPLOAD", default_value_t = DEFAULT_MAX_UPLOAD)]
        max_upload: usize,
    },
    /// Send one chat message; the supervisor picks the agent.
    Ask {
        #[arg(required = true, num_args = 1..)]
        query: Vec<String>,
        /// Files to attach.
        #[arg(long = "attach")]
        attach: Vec<PathBuf>,
        /// Continue an existing session.
        #[arg(long)]
        session: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Identify security assets in a specification.
    Assets {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build a threat model and test plan.
    ThreatModel {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        assets: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Scan an RTL design for known vulnerability patterns.
    Detect {
        #[arg(long)]
        rtl: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Validate a suspected bug by simulation.
    ValidateBug {
        #[arg(long)]
        rtl: PathBuf,
        #[arg(long)]
        bug_report: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate SystemVerilog assertions.
    GenProperties {
        #[arg(long)]
        rtl: PathBuf,
        /// Threat vectors, one per line, or a file holding them.
        #[arg(long)]
        threats: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check assertions against a design's signals.
    CheckSva {
        file: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        /// Tolerate a trailing `endproperty` after each assertion.
        #[arg(long)]
        lenient: bool,
    },
    /// Build knowledge stores from a manifest of (path, label) rows.
    BuildStore {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the data directory's stores.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
        #[arg(long, default_value_t = DEFAULT_OVERLAP)]
        overlap: usize,
    },
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "upload".into())
}

fn upload(wb: &Workbench, path: &Path) -> anyhow::Result<ArtifactRef> {
    Ok(wb.upload(&file_name(path), &read(path)?, None)?)
}

/// Prints events as NDJSON, or step progress on stderr.
struct Printer {
    ndjson: bool,
}

impl EventSink for Printer {
    fn emit(&mut self, m: ApiMessage) {
        if self.ndjson {
            print!("{}", m.to_ndjson());
            let _ = std::io::stdout().flush();
        } else if let ApiMessage::StepProgress { progress, .. } = &m {
            eprintln!("[{}] {}", progress.status, progress.step);
        }
    }
}

/// Answers from `--answer`, then stdin.
struct Answers {
    given: BTreeMap<String, String>,
}

impl Answers {
    fn get(&mut self, r: &Requirement) -> anyhow::Result<String> {
        if let Some(v) = self.given.remove(&r.name) {
            return Ok(v);
        }
        eprint!("{} ({}): ", r.name, r.description);
        let _ = std::io::stderr().flush();
        let mut line = String::new();
        if std::io::stdin().lock().read_line(&mut line)? == 0 || line.trim().is_empty() {
            bail!("no answer for {}; pass --answer {}=VALUE", r.name, r.name);
        }
        Ok(line.trim().to_string())
    }
}

fn finish(wb: &Workbench, reply: Reply, run: &RunArgs) -> anyhow::Result<ExitCode> {
    match reply {
        Reply::Answer { text, artifacts, .. } => {
            if !run.ndjson {
                println!("{}", text.trim_end());
            }
            if !artifacts.is_empty() {
                std::fs::create_dir_all(&run.out).with_context(|| format!("cannot create {}", run.out.display()))?;
            }
            for a in &artifacts {
                let path = run.out.join(&a.filename);
                std::fs::write(&path, wb.store().read_artifact(&a.artifact_id)?)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Reply::Failed { step, error } => {
            eprintln!("step {step} failed: {error}");
            Ok(ExitCode::FAILURE)
        }
        Reply::NeedsInput { .. } => unreachable!("input requests are answered before finishing"),
    }
}

fn run_agent(
    wb: &Workbench,
    config: SessionConfig,
    agent: AgentKind,
    mut inputs: BTreeMap<String, InputValue>,
    run: &RunArgs,
) -> anyhow::Result<ExitCode> {
    let session = wb.create_session(config)?;
    let sid = session.session_id;
    let mut answers = Answers { given: run.answers.iter().cloned().collect() };
    let mut printer = Printer { ndjson: run.ndjson };
    let mut reply = wb.run_agent(&sid, agent, inputs.clone(), &mut printer)?;
    loop {
        reply = match reply {
            Reply::NeedsInput { plan_id: Some(_), requirements } => {
                let mut got = BTreeMap::new();
                for r in &requirements {
                    got.insert(r.name.clone(), answers.get(r)?);
                }
                wb.answer_pending(&sid, got, &mut printer)?
            }
            Reply::NeedsInput { plan_id: None, requirements } => {
                for r in &requirements {
                    let v = answers.get(r)?;
                    let value = match r.kind {
                        RequirementKind::Text => InputValue::Text(v),
                        RequirementKind::Artifact(_) => InputValue::Artifact(upload(wb, Path::new(&v))?),
                    };
                    inputs.insert(r.name.clone(), value);
                }
                wb.run_agent(&sid, agent, inputs.clone(), &mut printer)?
            }
            done => return finish(wb, done, run),
        };
    }
}

fn ask(
    wb: &Workbench,
    config: SessionConfig,
    session: Option<String>,
    query: &str,
    attach: &[PathBuf],
    run: &RunArgs,
) -> anyhow::Result<ExitCode> {
    let sid = match session {
        Some(s) => s,
        None => wb.create_session(config)?.session_id,
    };
    eprintln!("session {sid}");
    let mut ids = Vec::new();
    for p in attach {
        ids.push(upload(wb, p)?.artifact_id);
    }
    let mut answers = Answers { given: run.answers.iter().cloned().collect() };
    let mut printer = Printer { ndjson: run.ndjson };
    let mut reply = wb.handle_message(&sid, query, &ids, &mut printer)?;
    loop {
        reply = match reply {
            Reply::NeedsInput { plan_id: Some(_), requirements } => {
                let mut got = BTreeMap::new();
                for r in &requirements {
                    got.insert(r.name.clone(), answers.get(r)?);
                }
                wb.answer_pending(&sid, got, &mut printer)?
            }
            Reply::NeedsInput { plan_id: None, requirements } => {
                let mut lines = Vec::new();
                let mut files = Vec::new();
                for r in &requirements {
                    let v = answers.get(r)?;
                    match r.kind {
                        RequirementKind::Text => lines.push(format!("{}: {v}", r.name)),
                        RequirementKind::Artifact(_) => {
                            let a = upload(wb, Path::new(&v))?;
                            lines.push(format!("{}: {}", r.name, a.filename));
                            files.push(a.artifact_id);
                        }
                    }
                }
                wb.handle_message(&sid, &lines.join("\n"), &files, &mut printer)?
            }
            done => return finish(wb, done, run),
        };
    }
}

/// Prints diagnostics as `file:line:col: severity: message`. Exits 1 when
/// any is an error.
fn check_sva(file: &Path, design: Option<&Path>, lenient: bool) -> anyhow::Result<ExitCode> {
    let text = read_text(file)?;
    let table = match design {
        Some(d) => Some(parse_ports(&read_text(d)?).map_err(|e| anyhow::anyhow!("{}: {e}", d.display()))?),
        None => None,
    };
    let report = check_sva_file(&text, table.as_ref(), SvaOptions { lenient });
    for d in &report.diagnostics {
        println!("{}:{}:{}: {}: {}", file.display(), d.line, d.column, d.severity, d.message);
    }
    if has_errors(&report.diagnostics) {
        Ok(ExitCode::FAILURE)
    } else {
        eprintln!("{}: {} assertions ok", file.display(), report.assertions.len());
        Ok(ExitCode::SUCCESS)
    }
}

fn build_store(manifest: &Path, out: &Path, chunk_size: usize, overlap: usize) -> anyhow::Result<ExitCode> {
    let stores = build_from_manifest(manifest, &HashEmbedder::default(), chunk_size, overlap)?;
    for s in &stores {
        let dir = s.save(out)?;
        println!("{}\t{}\t{} chunks", s.store_id, dir.display(), s.len());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let svc = cli.env.service_config();
    let agent_verb = |agent: AgentKind, inputs: Vec<(&str, &Path)>, run: &RunArgs| -> anyhow::Result<ExitCode> {
        let wb = svc.build()?;
        let mut map = BTreeMap::new();
        for (name, path) in inputs {
            map.insert(name.to_string(), InputValue::Artifact(upload(&wb, path)?));
        }
        run_agent(&wb, cli.env.session_config(&svc), agent, map, run)
    };
    match &cli.command {
        Command::Serve { port, bind, max_upload } => {
            let svc = ServiceConfig { max_upload: *max_upload, ..svc.clone() };
            let state = AppState::new(svc.build()?, svc.max_upload, cli.env.session_config(&svc));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, SocketAddr::new(*bind, *port)))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ask { query, attach, session, run } => {
            let wb = svc.build()?;
            ask(&wb, cli.env.session_config(&svc), session.clone(), &query.join(" "), attach, run)
        }
        Command::Assets { spec, run } => agent_verb(AgentKind::AssetIdentification, vec![("spec_document", spec)], run),
        Command::ThreatModel { spec, assets, run } => {
            agent_verb(AgentKind::ThreatModeling, vec![("spec_document", spec), ("asset_json", assets)], run)
        }
        Command::Detect { rtl, run } => agent_verb(AgentKind::VulnerabilityDetection, vec![("rtl_design", rtl)], run),
        Command::ValidateBug { rtl, bug_report, run } => {
            agent_verb(AgentKind::BugValidation, vec![("rtl_design", rtl), ("bug_report", bug_report)], run)
        }
        Command::GenProperties { rtl, threats, run } => {
            let wb = svc.build()?;
            let threats = match Path::new(threats) {
                p if p.is_file() => read_text(p)?,
                _ => threats.clone(),
            };
            let inputs = BTreeMap::from([
                ("rtl_design".to_string(), InputValue::Artifact(upload(&wb, rtl)?)),
                ("threat_vectors".to_string(), InputValue::Text(threats)),
            ]);
            run_agent(&wb, cli.env.session_config(&svc), AgentKind::PropertyGeneration, inputs, run)
        }
        Command::CheckSva { file, design, lenient } => check_sva(file, design.as_deref(), *lenient),
        Command::BuildStore { manifest, out, chunk_size, overlap } => {
            build_store(manifest, &out.clone().unwrap_or_else(|| svc.stores_dir()), *chunk_size, *overlap)
        }
    }
}
