//! Assembles a workbench from the process environment.

use std::path::PathBuf;
use std::sync::Arc;

use svw_agents::bugvalidate::{ExternalSimulator, MockSimulator, Simulator};
use svw_agents::Resources;
use svw_core::{Clock, SessionConfig, SessionStore, SystemClock};
use svw_engine::Workbench;
use svw_knowledge::{HashEmbedder, KnowledgeBase, MockWebSearch};
use svw_llm::{Gateway, MockBackend, RemoteBackend, RemoteConfig};

use crate::error::ServiceError;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub max_upload: usize,
    /// Mock backend fixture tree, registered as backend `mock`.
    pub mock_fixtures: Option<PathBuf>,
    /// Canned simulation logs keyed by design name.
    pub mock_traces: Option<PathBuf>,
    /// Canned web search results.
    pub search_fixtures: Option<PathBuf>,
    /// Simulator command line with `{dut}`, `{tb}`, `{log}`, `{work}`
    /// placeholders. Takes precedence over the mock traces.
    pub simulator: Option<String>,
    /// Remote chat-completion endpoint, registered as backend `remote`.
    pub remote: Option<RemoteConfig>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            max_upload: DEFAULT_MAX_UPLOAD,
            mock_fixtures: None,
            mock_traces: None,
            search_fixtures: None,
            simulator: None,
            remote: None,
        }
    }

    /// Backend new sessions use unless they name one.
    pub fn default_backend(&self) -> &'static str {
        if self.remote.is_some() && self.mock_fixtures.is_none() {
            "remote"
        } else {
            "mock"
        }
    }

    pub fn session_defaults(&self) -> SessionConfig {
        SessionConfig { backend_id: self.default_backend().into(), ..SessionConfig::default() }
    }

    pub fn stores_dir(&self) -> PathBuf {
        self.data_dir.join("stores")
    }

    pub fn build(&self) -> Result<Workbench, ServiceError> {
        self.build_with_clock(Arc::new(SystemClock))
    }

    pub fn build_with_clock(&self, clock: Arc<dyn Clock>) -> Result<Workbench, ServiceError> {
        let mut gateway = Gateway::with_builtin_templates();
        let mock = match &self.mock_fixtures {
            Some(dir) => MockBackend::from_dir(dir)?,
            None => MockBackend::new(),
        };
        gateway.register("mock", Arc::new(mock));
        if let Some(r) = &self.remote {
            gateway.register("remote", Arc::new(RemoteBackend::new(r.clone())));
        }

        let simulator: Box<dyn Simulator> = match &self.simulator {
            Some(command) => Box::new(ExternalSimulator { id: "external".into(), command: command.clone() }),
            None => {
                Box::new(MockSimulator::new(self.mock_traces.clone().unwrap_or_else(|| self.data_dir.join("traces"))))
            }
        };
        let mut resources = Resources::bundled(simulator, self.data_dir.join("work"));
        let kb = KnowledgeBase::load_dir(&self.stores_dir(), Box::new(HashEmbedder::default()))?;
        if !kb.is_empty() {
            resources.knowledge = Some(kb);
        }
        if let Some(dir) = &self.search_fixtures {
            resources.web = Some(Box::new(MockWebSearch::new(dir)));
        }
        let store = SessionStore::open(&self.data_dir).map_err(svw_engine::EngineError::from)?;
        Ok(Workbench::new(store, Arc::new(gateway), resources, clock))
    }
}
