//! Domain types shared by every layer, session memory and the on-disk store.

mod clock;
mod error;
mod ids;
mod session;
mod store;
mod types;

pub use clock::{Clock, FixedClock, SystemClock};
pub use error::CoreError;
pub use ids::{is_valid_id, new_id};
pub use session::{create_session, parse_follow_up, resolve_follow_up, transcript_ndjson, FollowUp, Session};
pub use store::{sanitize_filename, write_atomic, SessionStore};
pub use types::{
    AgentKind, ArtifactKind, ArtifactRef, Author, ExecutionState, InputValue, IntentMode, IntentResolution, PlanStatus,
    Requirement, RequirementKind, SessionConfig, StepSpec, StepState, TaskContext, TaskPlan, Turn,
};
