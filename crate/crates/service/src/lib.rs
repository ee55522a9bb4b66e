//! HTTP API and command-line front end of the workbench.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;

pub use api::{router, AppState};
pub use config::ServiceConfig;
pub use error::ServiceError;
