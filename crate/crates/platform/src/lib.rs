//! Service, configuration and command line around `tomtalk-core`.

pub mod cli;
pub mod config;
pub mod pets;
pub mod service;
pub mod wire;

pub use config::{PlatformConfig, CONFIG_ENV};
pub use service::{router, AppState, ServeError, Service};
