//! File formats, JSON reports and the command-line front end for
//! [`equirank_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod report;

pub use error::{CliError, Result};
pub use pipeline::{run_evaluate, DatasetBundle, EvaluationConfig};
pub use report::EvaluationReport;
