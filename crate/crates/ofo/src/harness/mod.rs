//! Closed-loop simulation harness: scenario configs, trace recording, seed
//! sweeps, comparison reports, and SVG plots. The harness is what the CLI
//! and the examples drive; the controller and plant underneath never touch
//! files or terminals.

use thiserror::Error;

use crate::controller::ControllerError;
use crate::plant::PlantError;

pub mod config;
pub mod csv;
pub mod monte_carlo;
pub mod plot;
pub mod report;
pub mod scenario;

pub use config::{benchmark_schedule, CapStep, ScenarioConfig};
pub use csv::{read_csv, read_csv_file, write_csv, write_csv_file};
pub use monte_carlo::{monte_carlo, MonteCarloSummary, COMPLETION_TARGET};
pub use plot::{cost_figure, perturbation_figure};
pub use report::{compare_report, CompareReport, TraceMetrics};
pub use scenario::{run_scenario, ScenarioTrace, TraceRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("trace parse error: {0}")]
    Parse(String),
    #[error("sweep incomplete: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code the CLI maps this error to: config problems are 1,
    /// numerical failures 2, I/O failures 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse(_) => 1,
            HarnessError::Controller(_) | HarnessError::Plant(_) | HarnessError::Incomplete(_) => {
                2
            }
            HarnessError::Io(_) => 3,
        }
    }
}
