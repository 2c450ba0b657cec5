//! Scenario files, simulation driver and output writers for the `gradplast`
//! command-line tool.

pub mod error;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use error::CliError;
pub use run::{run_scenario, RunSummary, TimeSeriesRow};
pub use scenario::{parse_scenario, Scenario};
pub use sweep::{sweep, SweepParam, SweepRow};

use std::path::Path;

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_scenario(&text)
}
