//! IO side of the proximity engine: file formats, the dataset store, the
//! shared scenario engine, report rendering, the CLI and the HTTP service.
//!
//! The algorithms live in [`proximity_core`].

pub mod cli;
pub mod engine;
pub mod ingest;
pub mod report;
pub mod service;
pub mod store;

pub use engine::{Engine, EngineError};
pub use store::Store;
