//! Seed sweeps over one scenario, in parallel. Failed runs are collected
//! rather than aborting individual workers, but a sweep missing its
//! completion target is an error: a mean over too few survivors would look
//! healthier than the experiment was.

use rayon::prelude::*;

use crate::controller::Variant;

use super::config::ScenarioConfig;
use super::scenario::{run_scenario, ScenarioTrace};
use super::HarnessError;

/// Minimum fraction of runs that must complete for a sweep to count.
pub const COMPLETION_TARGET: f64 = 0.95;

/// Per-step cost statistics across a seed sweep.
#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub variant: Variant,
    pub steps: usize,
    pub requested: usize,
    pub completed: usize,
    /// Seeds of the completed runs, ascending.
    pub seeds: Vec<u64>,
    /// Arithmetic mean of cost at each step across completed runs.
    pub mean_cost: Vec<f64>,
    /// Population standard deviation of cost at each step.
    pub std_cost: Vec<f64>,
    /// `(seed, cumulative profit)` per completed run, in seed order.
    pub profits: Vec<(u64, f64)>,
    /// `(seed, error)` per failed run, in seed order.
    pub failures: Vec<(u64, String)>,
}

impl MonteCarloSummary {
    pub fn completion_rate(&self) -> f64 {
        if self.requested == 0 {
            return 0.0;
        }
        self.completed as f64 / self.requested as f64
    }

    /// Mean cumulative profit; equals the negated sum of `mean_cost`.
    pub fn mean_cumulative_profit(&self) -> f64 {
        let total: f64 = self.profits.iter().map(|&(_, p)| p).sum();
        total / self.completed as f64
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "monte carlo: variant {} over {} runs, {} completed ({:.1}%)\n",
            self.variant,
            self.requested,
            self.completed,
            100.0 * self.completion_rate()
        );
        out.push_str(&format!(
            "cumulative profit: mean {:.6}\n",
            self.mean_cumulative_profit()
        ));
        let early = self.steps / 10;
        let late = self.steps - 1;
        out.push_str(&format!(
            "cost mean/std at step {}: {:.6} / {:.6}; at step {}: {:.6} / {:.6}\n",
            early, self.mean_cost[early], self.std_cost[early], late, self.mean_cost[late],
            self.std_cost[late]
        ));
        for (seed, error) in &self.failures {
            out.push_str(&format!("failed seed {seed}: {error}\n"));
        }
        out
    }
}

/// Run `runs` copies of the scenario with seeds `base.seed, base.seed + 1,
/// ...`, in parallel. Only the seed varies; the schedule, field, and
/// parameters are shared. Statistics are reduced in seed order, so the
/// result does not depend on scheduling.
pub fn monte_carlo(base: &ScenarioConfig, runs: usize) -> Result<MonteCarloSummary, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    base.validate()?;

    let outcomes: Vec<Result<(u64, ScenarioTrace), (u64, String)>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut config = base.clone();
            config.seed = base.seed.wrapping_add(i as u64);
            match run_scenario(&config) {
                Ok(trace) => Ok((config.seed, trace)),
                Err(e) => Err((config.seed, e.to_string())),
            }
        })
        .collect();

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(pair) => traces.push(pair),
            Err(pair) => failures.push(pair),
        }
    }

    let completed = traces.len();
    if (completed as f64) < COMPLETION_TARGET * runs as f64 {
        return Err(HarnessError::Incomplete(format!(
            "{completed} of {runs} runs completed, below the {:.0}% target; first failure: {}",
            100.0 * COMPLETION_TARGET,
            failures
                .first()
                .map(|(seed, e)| format!("seed {seed}: {e}"))
                .unwrap_or_default()
        )));
    }

    let steps = base.steps;
    let mut mean_cost = vec![0.0; steps];
    for (_, trace) in &traces {
        for (t, row) in trace.rows.iter().enumerate() {
            mean_cost[t] += row.cost;
        }
    }
    for value in &mut mean_cost {
        *value /= completed as f64;
    }
    let mut std_cost = vec![0.0; steps];
    for (_, trace) in &traces {
        for (t, row) in trace.rows.iter().enumerate() {
            std_cost[t] += (row.cost - mean_cost[t]).powi(2);
        }
    }
    for value in &mut std_cost {
        *value = (*value / completed as f64).sqrt();
    }

    Ok(MonteCarloSummary {
        variant: base.variant,
        steps,
        requested: runs,
        completed,
        seeds: traces.iter().map(|&(seed, _)| seed).collect(),
        mean_cost,
        std_cost,
        profits: traces
            .iter()
            .map(|(seed, trace)| (*seed, trace.cumulative_profit()))
            .collect(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_mean_is_the_trace_and_std_is_zero() {
        let mut config = ScenarioConfig::default();
        config.variant = Variant::Gaussian;
        config.steps = 10;
        let summary = monte_carlo(&config, 1).unwrap();
        let trace = run_scenario(&config).unwrap();
        assert_eq!(summary.mean_cost, trace.cost_series());
        assert!(summary.std_cost.iter().all(|&s| s == 0.0));
        assert_eq!(summary.seeds, vec![config.seed]);
    }

    // Identical runs leave only summation roundoff: the sequential cost sum
    // rounds once per addend, so the recovered mean sits within a few ulp of
    // the common value and the spread is numerical zero rather than exact.
    fn assert_no_spread(summary: &MonteCarloSummary) {
        for (t, (&s, &m)) in summary.std_cost.iter().zip(&summary.mean_cost).enumerate() {
            assert!(s <= 1e-14 * (1.0 + m.abs()), "std {s:e} at step {t}");
        }
    }

    #[test]
    fn deterministic_variant_has_no_spread() {
        let mut config = ScenarioConfig::default();
        config.variant = Variant::Plain;
        config.steps = 10;
        let summary = monte_carlo(&config, 8).unwrap();
        assert_eq!(summary.completed, 8);
        assert_no_spread(&summary);
    }

    #[test]
    fn zero_dither_removes_all_spread() {
        let mut config = ScenarioConfig::default();
        config.variant = Variant::Gaussian;
        config.params.sigma_noise = 0.0;
        config.steps = 10;
        let summary = monte_carlo(&config, 8).unwrap();
        assert_no_spread(&summary);
    }

    #[test]
    fn mean_equals_arithmetic_mean_of_individual_traces() {
        let mut config = ScenarioConfig::default();
        config.variant = Variant::Gaussian;
        config.steps = 8;
        let runs = 4;
        let summary = monte_carlo(&config, runs).unwrap();

        let mut expected = vec![0.0; config.steps];
        for i in 0..runs {
            let mut single = config.clone();
            single.seed = config.seed + i as u64;
            let trace = run_scenario(&single).unwrap();
            for (t, row) in trace.rows.iter().enumerate() {
                expected[t] += row.cost;
            }
        }
        for value in &mut expected {
            *value /= runs as f64;
        }
        assert_eq!(summary.mean_cost, expected);
        assert!(summary.std_cost.iter().skip(1).any(|&s| s > 0.0));
    }

    #[test]
    fn zero_runs_is_a_config_error() {
        let config = ScenarioConfig::default();
        assert!(matches!(
            monte_carlo(&config, 0),
            Err(HarnessError::Config(_))
        ));
    }
}
