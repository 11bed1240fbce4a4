//! File formats, ingestion, experiment orchestration and the command line
//! front end for block-model shrinkage estimation.

pub mod error;
pub mod experiment;
pub mod formats;
pub mod io;
pub mod pipeline;
pub mod realdata;

pub use error::{Error, ExitCode, Result};
