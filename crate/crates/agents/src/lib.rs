//! The six verification agents and the step runner that executes their
//! pipelines.

pub mod assets;
pub mod bugvalidate;
pub mod chat;
mod env;
mod error;
pub mod properties;
pub mod steps;
pub mod text;
pub mod threatmodel;
pub mod vulndetect;

pub use env::AgentEnv;
pub use error::AgentError;
pub use steps::{
    design_name, pipeline, requirements, AgentRunner, ResolvedInput, Resources, StepCall, StepOutcome, StepRunner,
};
