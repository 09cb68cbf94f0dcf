//! Volumetric protein pocket detection with group equivariant non-expansive
//! operators, and the statistical harness around it.

pub mod cli;
pub mod error;
pub mod geneo;
pub mod grid;
pub mod ingest;
pub mod potentials;
pub mod stats;
pub mod train;

pub use error::{Error, Result};
