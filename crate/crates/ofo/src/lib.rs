//! Online feedback optimization with persistently exciting input design.

pub mod controller;
pub mod estimator;
pub mod harness;
pub mod plant;
pub mod qp;

pub use controller::{
    excitation_check, left_nullspace, solve_lower, solve_pe_step, ConstraintSpec, Controller,
    ControllerError, CostModel, ExcitationWindow, JacobianSource, LinearCost, PeParameters,
    PerturbationSolution, StepOutcome, Variant,
};
pub use estimator::{EstimatorError, NoiseModel, SensitivityEstimate};
pub use harness::{
    compare_report, monte_carlo, run_scenario, CompareReport, HarnessError, MonteCarloSummary,
    ScenarioConfig, ScenarioTrace,
};
pub use plant::{FieldModel, PlantError, PriceModel, WellModel};
pub use qp::{PolyhedralSet, QpError, QpProblem, QpSolution, QpStatus};
