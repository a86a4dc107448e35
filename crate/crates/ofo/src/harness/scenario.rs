//! Closed-loop execution of one scenario: wire a controller to the plant,
//! walk the availability schedule, and record everything a later analysis
//! needs.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{gaussian_perturbation, Controller, Variant};
use crate::estimator::SensitivityEstimate;
use crate::plant;

use super::config::ScenarioConfig;
use super::HarnessError;

/// Distinct stream for measurement noise so controller dither and sensor
/// noise never share randomness.
const NOISE_STREAM_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// State and transition record for one step: the operating point entering
/// the step, and the step the controller took from it.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub step: usize,
    pub cap: f64,
    /// Running cost at the operating point (profit is its negative).
    pub cost: f64,
    pub excited: bool,
    /// `|v_perp . delta_u|` of the applied delta against the pre-step window.
    pub margin: f64,
    /// Frobenius distance from the Jacobian the controller used to the
    /// plant's analytic one at this operating point.
    pub est_error: f64,
    pub fp_iterations: usize,
    /// Certificate residual of the perturbation solve; zero for variants
    /// without one.
    pub lower_residual: f64,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    /// Recorded perturbation: planned for the bilevel variant, drawn dither
    /// for the randomized one, zero otherwise.
    pub s: DVector<f64>,
}

/// Everything one run produced, one row per controller step.
#[derive(Debug, Clone)]
pub struct ScenarioTrace {
    pub variant: Variant,
    pub seed: u64,
    pub n_u: usize,
    pub n_y: usize,
    pub rows: Vec<TraceRow>,
}

impl ScenarioTrace {
    /// Steps before the excitation window first fills.
    pub fn warmup(&self) -> usize {
        self.n_u.saturating_sub(1)
    }

    /// Profit accumulated over the whole run: the negated cost sum.
    pub fn cumulative_profit(&self) -> f64 {
        -self.rows.iter().map(|r| r.cost).sum::<f64>()
    }

    pub fn cost_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cost).collect()
    }

    /// Mean profit over steps in `[start, end)`, clamped to the trace.
    pub fn windowed_mean_profit(&self, start: usize, end: usize) -> Option<f64> {
        let end = end.min(self.rows.len());
        if start >= end {
            return None;
        }
        let total: f64 = self.rows[start..end].iter().map(|r| -r.cost).sum();
        Some(total / (end - start) as f64)
    }

    /// Fraction of steps from `from` on whose applied delta met the margin.
    pub fn excitation_rate(&self, from: usize) -> f64 {
        let rows = &self.rows[from.min(self.rows.len())..];
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.excited).count() as f64 / rows.len() as f64
    }
}

/// Run one scenario to completion. Deterministic for a given config: the
/// controller stream is seeded by `seed`, the sensor-noise stream by a fixed
/// offset of it.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioTrace, HarnessError> {
    config.validate()?;
    let field = &config.field;
    let n_u = field.n_inputs();
    let n_y = field.n_outputs();
    let cap0 = config.cap_at(0);

    let mut builder = Controller::builder(config.variant, n_u, n_y)
        .cost(Box::new(field.cost_model()))
        .input_set(field.availability_constraints(cap0))
        .budget_row(plant::budget_row(field.num_wells()))
        .params(config.params)
        .noise(config.noise)
        .initial_input(DVector::from_vec(config.resolved_initial_input()))
        .initial_estimate(
            SensitivityEstimate::uniform(n_u, n_y, config.estimate_fill, config.estimate_sigma)
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        )
        .seed(config.seed);
    if config.variant == Variant::Oracle {
        let oracle_field = field.clone();
        builder = builder.analytic_jacobian(move |u| {
            oracle_field
                .analytic_jacobian(u)
                .expect("controller inputs stay inside the plant's domain")
        });
    }
    let mut controller = builder.build()?;

    let mut sensor_rng =
        ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(NOISE_STREAM_OFFSET));
    let mut rows = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let u = controller.current_input().clone();
        let mut y = field.evaluate(&u)?;
        if config.measurement_noise > 0.0 {
            y += gaussian_perturbation(&mut sensor_rng, config.measurement_noise, n_y);
        }
        let cap = config.cap_at(step);
        let outcome = controller.step(&y, Some(cap))?;
        let est_error = (&outcome.jacobian - field.analytic_jacobian(&u)?).norm();
        rows.push(TraceRow {
            step,
            cap,
            cost: outcome.cost_value,
            excited: outcome.excited,
            margin: outcome.margin,
            est_error,
            fp_iterations: outcome.fp_iterations,
            lower_residual: outcome.lower_residual,
            u,
            y,
            s: outcome.s_recorded,
        });
    }

    Ok(ScenarioTrace {
        variant: config.variant,
        seed: config.seed,
        n_u,
        n_y,
        rows,
    })
}
