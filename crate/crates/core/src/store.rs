//! On-disk layout:
//!
//! ```text
//! <data_dir>/sessions/<session_id>/session.json
//! <data_dir>/sessions/<session_id>/transcript.ndjson
//! <data_dir>/sessions/<session_id>/state.json
//! <data_dir>/sessions/<session_id>/plans/<plan_id>.json
//! <data_dir>/artifacts/<artifact_id>
//! <data_dir>/artifacts/<artifact_id>.meta.json
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::ids::{is_valid_id, new_id};
use crate::session::{create_session, Session};
use crate::types::{ArtifactKind, ArtifactRef, ExecutionState, SessionConfig, TaskContext, Turn};

/// Writes via a temporary sibling and rename, so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let tmp = dir.join(format!(".{}.{}.tmp", path.file_name().and_then(|n| n.to_str()).unwrap_or("file"), new_id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CoreError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CoreError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CoreError> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CoreError::serde(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Serialize, Deserialize)]
struct SessionHeader {
    session_id: String,
    config: SessionConfig,
    created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, CoreError> {
        let root = data_dir.into();
        for sub in ["sessions", "artifacts"] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(|e| CoreError::io(&d, e))?;
        }
        Ok(Self { root })
    }

    pub fn data_dir(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, id: &str) -> Result<PathBuf, CoreError> {
        if !is_valid_id(id) {
            return Err(CoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join("sessions").join(id))
    }

    pub fn transcript_path(&self, id: &str) -> Result<PathBuf, CoreError> {
        Ok(self.session_dir(id)?.join("transcript.ndjson"))
    }

    pub fn create_session(&self, config: SessionConfig, now: DateTime<Utc>) -> Result<Session, CoreError> {
        let s = create_session(config, now)?;
        let dir = self.session_dir(&s.session_id)?;
        fs::create_dir_all(&dir).map_err(|e| CoreError::io(&dir, e))?;
        self.write_header(&s)?;
        let t = dir.join("transcript.ndjson");
        fs::File::create(&t).map_err(|e| CoreError::io(&t, e))?;
        self.save_context(&s)?;
        Ok(s)
    }

    fn write_header(&self, s: &Session) -> Result<(), CoreError> {
        let header =
            SessionHeader { session_id: s.session_id.clone(), config: s.config.clone(), created_at: s.created_at };
        write_json(&self.session_dir(&s.session_id)?.join("session.json"), &header)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.session_dir(id).map(|d| d.join("session.json").is_file()).unwrap_or(false)
    }

    pub fn load_session(&self, id: &str) -> Result<Session, CoreError> {
        let dir = self.session_dir(id)?;
        let header_path = dir.join("session.json");
        if !header_path.is_file() {
            return Err(CoreError::NotFound { what: "session", id: id.to_string() });
        }
        let header: SessionHeader = read_json(&header_path)?;
        let tpath = dir.join("transcript.ndjson");
        let text = fs::read_to_string(&tpath).map_err(|e| CoreError::io(&tpath, e))?;
        let mut transcript = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let turn: Turn = serde_json::from_str(line).map_err(|e| CoreError::serde(&tpath, e))?;
            if turn.index != transcript.len() {
                return Err(CoreError::Sequence { expected: transcript.len(), got: turn.index });
            }
            transcript.push(turn);
        }
        let spath = dir.join("state.json");
        let short_term: TaskContext = if spath.is_file() { read_json(&spath)? } else { TaskContext::default() };
        Ok(Session {
            session_id: header.session_id,
            config: header.config,
            created_at: header.created_at,
            transcript,
            short_term,
        })
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, CoreError> {
        let dir = self.root.join("sessions");
        let mut out: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| CoreError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| is_valid_id(n))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Validates the index, appends one line to the transcript file, then
    /// updates the in-memory session.
    pub fn append_turn(&self, session: &mut Session, turn: Turn) -> Result<(), CoreError> {
        if turn.index != session.transcript.len() {
            return Err(CoreError::Sequence { expected: session.transcript.len(), got: turn.index });
        }
        let path = self.transcript_path(&session.session_id)?;
        let mut line = serde_json::to_vec(&turn).expect("turn serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new().append(true).create(true).open(&path).map_err(|e| CoreError::io(&path, e))?;
        f.write_all(&line).map_err(|e| CoreError::io(&path, e))?;
        f.sync_data().map_err(|e| CoreError::io(&path, e))?;
        session.append_turn(turn)?;
        Ok(())
    }

    pub fn save_context(&self, session: &Session) -> Result<(), CoreError> {
        write_json(&self.session_dir(&session.session_id)?.join("state.json"), &session.short_term)
    }

    pub fn update_config(&self, session: &mut Session, config: SessionConfig) -> Result<(), CoreError> {
        config.validate()?;
        session.config = config;
        self.write_header(session)
    }

    fn plan_path(&self, session_id: &str, plan_id: &str) -> Result<PathBuf, CoreError> {
        if !is_valid_id(plan_id) {
            return Err(CoreError::InvalidId(plan_id.to_string()));
        }
        Ok(self.session_dir(session_id)?.join("plans").join(format!("{plan_id}.json")))
    }

    pub fn save_execution(&self, session_id: &str, state: &ExecutionState) -> Result<(), CoreError> {
        write_json(&self.plan_path(session_id, state.plan_id())?, state)
    }

    pub fn load_execution(&self, session_id: &str, plan_id: &str) -> Result<ExecutionState, CoreError> {
        let p = self.plan_path(session_id, plan_id)?;
        if !p.is_file() {
            return Err(CoreError::NotFound { what: "plan", id: plan_id.to_string() });
        }
        read_json(&p)
    }

    // -- artifacts ----------------------------------------------------------

    fn artifact_path(&self, id: &str) -> Result<PathBuf, CoreError> {
        if !is_valid_id(id) {
            return Err(CoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join("artifacts").join(id))
    }

    pub fn put_artifact(&self, kind: ArtifactKind, filename: &str, bytes: &[u8]) -> Result<ArtifactRef, CoreError> {
        let r = ArtifactRef {
            artifact_id: new_id(),
            kind,
            filename: sanitize_filename(filename),
            byte_length: bytes.len() as u64,
        };
        let path = self.artifact_path(&r.artifact_id)?;
        write_atomic(&path, bytes)?;
        write_json(&path.with_extension("meta.json"), &r)?;
        Ok(r)
    }

    pub fn artifact(&self, id: &str) -> Result<ArtifactRef, CoreError> {
        let meta = self.artifact_path(id)?.with_extension("meta.json");
        if !meta.is_file() {
            return Err(CoreError::NotFound { what: "artifact", id: id.to_string() });
        }
        read_json(&meta)
    }

    pub fn read_artifact(&self, id: &str) -> Result<Vec<u8>, CoreError> {
        let p = self.artifact_path(id)?;
        if !p.is_file() {
            return Err(CoreError::NotFound { what: "artifact", id: id.to_string() });
        }
        fs::read(&p).map_err(|e| CoreError::io(&p, e))
    }

    pub fn read_artifact_text(&self, id: &str) -> Result<String, CoreError> {
        let bytes = self.read_artifact(id)?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Keeps only the final path component and replaces control characters.
pub fn sanitize_filename(name: &str) -> String {
    let base = name.rsplit(['/', '\\']).next().unwrap_or("");
    let cleaned: String = base.chars().map(|c| if c.is_control() { '_' } else { c }).collect();
    let cleaned = cleaned.trim().trim_start_matches('.').to_string();
    if cleaned.is_empty() {
        "upload.bin".into()
    } else {
        cleaned
    }
}
