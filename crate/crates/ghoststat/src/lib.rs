//! Run directories, file formats, configs and the verification runner
//! around `ghoststat-core`.

pub mod config;
pub mod error;
pub mod parallel;
pub mod pgm;
pub mod pipeline;
pub mod report;
pub mod runfile;
pub mod stack;
pub mod verify;

pub use config::{load_config, preset, RunConfig};
pub use error::{Error, Result};
pub use pipeline::{analyze, ingest, reconstruct, simulate, IngestOptions};
