//! Supervisor, orchestrator and the workbench that runs user requests
//! against the agents.

mod error;
pub mod events;
pub mod orchestrator;
pub mod outputs;
pub mod supervisor;
pub mod workbench;

pub use error::EngineError;
pub use events::{ApiMessage, EventSink, StepProgress};
pub use orchestrator::{handle_failure, resolve_inputs, Action, Limits, Orchestrator, RunOutcome};
pub use supervisor::{build_plan, detect_intent, reject_off_domain, validate_context, Validation, REFUSAL};
pub use workbench::{infer_kind, parse_answers, patch_config, Reply, Workbench};
