//! Sub-band dual-filter acoustic echo canceller whose control statistics
//! double as acoustic scene features.

pub mod adaptive;
pub mod config;
pub mod controller;
pub mod error;
pub mod event;
pub mod features;
pub mod filterbank;
pub mod io;
pub mod pipeline;
pub mod sim;
pub mod stats;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use event::EventClass;
pub use pipeline::{run_aec, AecOutput, Canceller};
