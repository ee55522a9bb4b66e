use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $s)] $var),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$var => $s),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let t = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == t)
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($name)))
            }
        }
    };
}

string_enum!(
    /// The six verification agents.
    AgentKind {
        SecurityQa => "security_qa",
        AssetIdentification => "asset_identification",
        ThreatModeling => "threat_modeling",
        VulnerabilityDetection => "vulnerability_detection",
        BugValidation => "bug_validation",
        PropertyGeneration => "property_generation",
    }
);

impl AgentKind {
    /// Lower is preferred when a reply names several categories.
    pub fn priority(self) -> u8 {
        match self {
            AgentKind::BugValidation => 0,
            AgentKind::PropertyGeneration => 1,
            AgentKind::VulnerabilityDetection => 2,
            AgentKind::ThreatModeling => 3,
            AgentKind::AssetIdentification => 4,
            AgentKind::SecurityQa => 5,
        }
    }
}

string_enum!(ArtifactKind {
    RtlDesign => "rtl_design",
    SpecDocument => "spec_document",
    BugReport => "bug_report",
    SvaFile => "sva_file",
    AssetJson => "asset_json",
    TestPlan => "test_plan",
    Testbench => "testbench",
    TraceLog => "trace_log",
    Report => "report",
});

string_enum!(IntentMode {
    Informational => "informational",
    Task => "task",
});

/// Who wrote a turn. Serialized as `user`, `system` or the agent name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Author {
    User,
    System,
    Agent(AgentKind),
}

impl Author {
    pub fn as_str(self) -> &'static str {
        match self {
            Author::User => "user",
            Author::System => "system",
            Author::Agent(a) => a.as_str(),
        }
    }
}

impl fmt::Display for Author {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Author {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "user" => Ok(Author::User),
            "system" => Ok(Author::System),
            other => other.parse().map(Author::Agent).map_err(|_| format!("unknown author {s:?}")),
        }
    }
}

impl Serialize for Author {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Author {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub artifact_id: String,
    pub kind: ArtifactKind,
    pub filename: String,
    pub byte_length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub backend_id: String,
    pub context_window_limit: u32,
    pub retrieval_k: u32,
    pub confidence_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { backend_id: "mock".into(), context_window_limit: 8192, retrieval_k: 5, confidence_threshold: 0.5 }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.retrieval_k == 0 {
            return Err(CoreError::Config("retrieval_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(CoreError::Config(format!(
                "confidence_threshold {} is outside [0, 1]",
                self.confidence_threshold
            )));
        }
        if self.backend_id.trim().is_empty() {
            return Err(CoreError::Config("backend_id is empty".into()));
        }
        if self.context_window_limit == 0 {
            return Err(CoreError::Config("context_window_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub author: Author,
    pub content: String,
    #[serde(default)]
    pub attachments: Vec<ArtifactRef>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResolution {
    pub categories: Vec<AgentKind>,
    pub mode: IntentMode,
    #[serde(default)]
    pub detected_artifacts: Vec<ArtifactKind>,
    #[serde(default)]
    pub mentioned_vulnerabilities: Vec<String>,
    pub in_domain: bool,
}

impl IntentResolution {
    pub fn off_domain() -> Self {
        Self {
            categories: vec![AgentKind::SecurityQa],
            mode: IntentMode::Informational,
            detected_artifacts: Vec::new(),
            mentioned_vulnerabilities: Vec::new(),
            in_domain: false,
        }
    }

    /// The category that gets the plan, by fixed priority.
    pub fn primary(&self) -> AgentKind {
        self.categories.iter().copied().min_by_key(|a| a.priority()).unwrap_or(AgentKind::SecurityQa)
    }

    /// Remaining categories, offered to the user as follow-ups.
    pub fn secondary(&self) -> Vec<AgentKind> {
        let p = self.primary();
        let mut seen = BTreeSet::new();
        self.categories.iter().copied().filter(|a| *a != p && seen.insert(*a)).collect()
    }
}

/// What a requirement needs: an artifact of a given kind, or free text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequirementKind {
    Artifact(ArtifactKind),
    Text,
}

impl RequirementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequirementKind::Artifact(k) => k.as_str(),
            RequirementKind::Text => "text",
        }
    }
}

impl Serialize for RequirementKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RequirementKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "text" {
            return Ok(RequirementKind::Text);
        }
        s.parse().map(RequirementKind::Artifact).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub name: String,
    pub kind: RequirementKind,
    pub description: String,
}

impl Requirement {
    pub fn new(name: impl Into<String>, kind: RequirementKind, description: impl Into<String>) -> Self {
        Self { name: name.into(), kind, description: description.into() }
    }

    pub fn text(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self::new(name, RequirementKind::Text, description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputValue {
    Artifact(ArtifactRef),
    Text(String),
}

impl InputValue {
    pub fn as_artifact(&self) -> Option<&ArtifactRef> {
        match self {
            InputValue::Artifact(a) => Some(a),
            InputValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            InputValue::Text(t) => Some(t),
            InputValue::Artifact(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub name: String,
    pub consumes: Vec<String>,
    pub produces: String,
}

impl StepSpec {
    pub fn new(name: &str, consumes: &[&str], produces: &str) -> Self {
        Self {
            name: name.into(),
            consumes: consumes.iter().map(|s| s.to_string()).collect(),
            produces: produces.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub plan_id: String,
    pub agent: AgentKind,
    pub steps: Vec<StepSpec>,
    pub inputs: BTreeMap<String, InputValue>,
}

impl TaskPlan {
    /// Every consumed name must be an input or produced by an earlier step,
    /// and produced names must be unique and not shadow inputs.
    pub fn check_dataflow(&self) -> Result<(), CoreError> {
        let mut available: BTreeSet<&str> = self.inputs.keys().map(String::as_str).collect();
        for step in &self.steps {
            for c in &step.consumes {
                if !available.contains(c.as_str()) {
                    return Err(CoreError::Dataflow(format!(
                        "step `{}` consumes `{c}` which is neither an input nor produced earlier",
                        step.name
                    )));
                }
            }
            if !available.insert(step.produces.as_str()) {
                return Err(CoreError::Dataflow(format!(
                    "step `{}` produces `{}` which already exists",
                    step.name, step.produces
                )));
            }
        }
        Ok(())
    }

    pub fn step_index(&self, name: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepState {
    Pending,
    Running { attempts: u32 },
    Succeeded { output: String, attempts: u32 },
    Failed { error: String, attempts: u32 },
    Suspended { requirements: Vec<Requirement>, attempts: u32 },
}

impl StepState {
    pub fn label(&self) -> &'static str {
        match self {
            StepState::Pending => "pending",
            StepState::Running { .. } => "running",
            StepState::Succeeded { .. } => "succeeded",
            StepState::Failed { .. } => "failed",
            StepState::Suspended { .. } => "suspended",
        }
    }

    pub fn attempts(&self) -> u32 {
        match self {
            StepState::Pending => 0,
            StepState::Running { attempts }
            | StepState::Succeeded { attempts, .. }
            | StepState::Failed { attempts, .. }
            | StepState::Suspended { attempts, .. } => *attempts,
        }
    }
}

string_enum!(PlanStatus {
    Pending => "pending",
    Running => "running",
    Suspended => "suspended",
    Completed => "completed",
    Failed => "failed",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionState {
    pub plan: TaskPlan,
    pub status: PlanStatus,
    pub step_states: Vec<StepState>,
    /// Step outputs by produced name.
    pub outputs: BTreeMap<String, serde_json::Value>,
    /// Answers the user supplied while the plan was suspended.
    #[serde(default)]
    pub answers: BTreeMap<String, String>,
    /// Feedback fed back into generation steps, per step name.
    #[serde(default)]
    pub feedback: BTreeMap<String, Vec<String>>,
    /// Questions put to the user while suspended, by requirement name.
    #[serde(default)]
    pub asked: BTreeMap<String, String>,
    #[serde(default)]
    pub failed_step: Option<String>,
}

impl ExecutionState {
    pub fn new(plan: TaskPlan) -> Self {
        let n = plan.steps.len();
        Self {
            plan,
            status: PlanStatus::Pending,
            step_states: vec![StepState::Pending; n],
            outputs: BTreeMap::new(),
            answers: BTreeMap::new(),
            feedback: BTreeMap::new(),
            asked: BTreeMap::new(),
            failed_step: None,
        }
    }

    pub fn plan_id(&self) -> &str {
        &self.plan.plan_id
    }

    /// Requirements of the suspended step, if any.
    pub fn pending_requirements(&self) -> Option<&[Requirement]> {
        self.step_states.iter().find_map(|s| match s {
            StepState::Suspended { requirements, .. } => Some(requirements.as_slice()),
            _ => None,
        })
    }
}

/// Short-term memory: the task currently being assembled or executed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskContext {
    pub task_id: Option<String>,
    pub intent: Option<IntentResolution>,
    pub gathered_inputs: BTreeMap<String, InputValue>,
    pub pending_requirements: Vec<String>,
    /// Plan id of the single active plan, if one is running or suspended.
    pub active_plan: Option<String>,
    pub last_output: Option<serde_json::Value>,
}

impl TaskContext {
    /// Records an input and removes it from the pending list, keeping the
    /// two disjoint.
    pub fn gather(&mut self, name: impl Into<String>, value: InputValue) {
        let name = name.into();
        self.pending_requirements.retain(|p| *p != name);
        self.gathered_inputs.insert(name, value);
    }

    pub fn set_pending(&mut self, names: impl IntoIterator<Item = String>) {
        self.pending_requirements = names.into_iter().filter(|n| !self.gathered_inputs.contains_key(n)).collect();
    }

    pub fn is_disjoint(&self) -> bool {
        self.pending_requirements.iter().all(|p| !self.gathered_inputs.contains_key(p))
    }
}
