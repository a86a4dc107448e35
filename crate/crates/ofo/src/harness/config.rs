//! Scenario configuration: a TOML-loadable description of one closed-loop
//! run. Every field has a default, so the empty document is the benchmark
//! scenario, and unknown keys are rejected rather than silently ignored.

use serde::{Deserialize, Serialize};

use crate::controller::{PeParameters, Variant};
use crate::estimator::NoiseModel;
use crate::plant::FieldModel;

use super::HarnessError;

/// A cap change: from `step` onward the shared injection budget is `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapStep {
    pub step: usize,
    pub cap: f64,
}

/// One closed-loop run, end to end: which controller variant, on which
/// field, from where, for how long, under which availability schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub variant: Variant,
    pub seed: u64,
    pub steps: usize,
    /// Stacked `[injection, choke]` pairs per well; `None` means
    /// `(0.1, 0.5)` per well.
    pub initial_input: Option<Vec<f64>>,
    /// Constant fill of the initial Jacobian estimate.
    pub estimate_fill: f64,
    /// Scale of the initial estimate covariance (identity times this).
    pub estimate_sigma: f64,
    /// Standard deviation of additive Gaussian noise on measured outputs.
    pub measurement_noise: f64,
    pub params: PeParameters,
    pub noise: NoiseModel,
    /// Piecewise-constant availability, sorted by step, starting at step 0.
    pub schedule: Vec<CapStep>,
    pub field: FieldModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "gas-lift".into(),
            variant: Variant::Pe,
            seed: 0,
            steps: 500,
            initial_input: None,
            estimate_fill: 1.0,
            estimate_sigma: 1.0,
            measurement_noise: 0.0,
            params: PeParameters::default(),
            noise: NoiseModel::default(),
            schedule: benchmark_schedule(),
            field: FieldModel::four_well_benchmark(),
        }
    }
}

/// The default availability trace: a cap change every 100 steps. The
/// unconstrained field optimum injects about 2.13 in total, so the caps walk
/// through binding (2.0), tight (1.2), slack (2.6), binding (1.6), and
/// marginal (2.2) regimes.
pub fn benchmark_schedule() -> Vec<CapStep> {
    vec![
        CapStep { step: 0, cap: 2.0 },
        CapStep { step: 100, cap: 1.2 },
        CapStep { step: 200, cap: 2.6 },
        CapStep { step: 300, cap: 1.6 },
        CapStep { step: 400, cap: 2.2 },
    ]
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// The cap in force at a given step.
    pub fn cap_at(&self, step: usize) -> f64 {
        let mut cap = self.schedule[0].cap;
        for entry in &self.schedule {
            if entry.step <= step {
                cap = entry.cap;
            } else {
                break;
            }
        }
        cap
    }

    /// The configured initial input, or the low-injection half-choke default.
    pub fn resolved_initial_input(&self) -> Vec<f64> {
        match &self.initial_input {
            Some(u) => u.clone(),
            None => (0..self.field.n_inputs())
                .map(|i| if i % 2 == 0 { 0.1 } else { 0.5 })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.steps == 0 {
            return Err(HarnessError::Config("steps must be at least 1".into()));
        }
        if self.field.num_wells() == 0 {
            return Err(HarnessError::Config("field has no wells".into()));
        }
        self.params
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.noise
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.estimate_sigma >= 0.0) {
            return Err(HarnessError::Config(format!(
                "estimate_sigma must be nonnegative, got {}",
                self.estimate_sigma
            )));
        }
        if !(self.measurement_noise >= 0.0) {
            return Err(HarnessError::Config(format!(
                "measurement_noise must be nonnegative, got {}",
                self.measurement_noise
            )));
        }

        if self.schedule.is_empty() {
            return Err(HarnessError::Config("schedule must not be empty".into()));
        }
        if self.schedule[0].step != 0 {
            return Err(HarnessError::Config(format!(
                "schedule must start at step 0, got {}",
                self.schedule[0].step
            )));
        }
        for pair in self.schedule.windows(2) {
            if pair[1].step <= pair[0].step {
                return Err(HarnessError::Config(format!(
                    "schedule steps must be strictly increasing, got {} then {}",
                    pair[0].step, pair[1].step
                )));
            }
        }
        for entry in &self.schedule {
            if !(entry.cap >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "cap at step {} must be nonnegative, got {}",
                    entry.step, entry.cap
                )));
            }
        }

        let u0 = self.resolved_initial_input();
        if u0.len() != self.field.n_inputs() {
            return Err(HarnessError::Config(format!(
                "initial input has length {}, expected {}",
                u0.len(),
                self.field.n_inputs()
            )));
        }
        if u0.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(HarnessError::Config(
                "initial input entries must lie in [0, 1]".into(),
            ));
        }
        let injected: f64 = u0.iter().step_by(2).sum();
        if injected > self.cap_at(0) + 1e-12 {
            return Err(HarnessError::Config(format!(
                "initial injection total {injected} exceeds the step-0 cap {}",
                self.cap_at(0)
            )));
        }
        Ok(())
    }
}
