//! Side-by-side comparison of recorded traces: cumulative profit, pairwise
//! differences, regret against an oracle trace when one is present, and
//! violation counts.

use crate::controller::Variant;

use super::scenario::ScenarioTrace;
use super::HarnessError;

/// Closed-loop outcome of one trace within a comparison.
#[derive(Debug, Clone)]
pub struct TraceMetrics {
    pub variant: Variant,
    pub seed: u64,
    pub cumulative_profit: f64,
    /// Steps after warm-up whose applied delta missed the excitation margin.
    pub excitation_violations: usize,
    /// Cost paid above the oracle trace, summed per step. Absent without an
    /// oracle trace; zero-length for the oracle itself.
    pub regret_vs_oracle: Option<f64>,
    /// Regret over the final ten percent of steps.
    pub tail_regret: Option<f64>,
}

/// Metrics for a set of traces over one shared scenario.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub metrics: Vec<TraceMetrics>,
    /// `(i, j, percent)` for every ordered pair `i < j`: how much more
    /// profit trace `i` accumulated than trace `j`, relative to `j`.
    pub pairwise_profit_pct: Vec<(usize, usize, f64)>,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>6} {:>16} {:>12} {:>14} {:>12}\n",
            "variant", "seed", "cum_profit", "excite_viol", "regret", "tail_regret"
        ));
        for m in &self.metrics {
            let fmt_opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.6}"),
                None => "-".into(),
            };
            out.push_str(&format!(
                "{:<10} {:>6} {:>16.6} {:>12} {:>14} {:>12}\n",
                m.variant.to_string(),
                m.seed,
                m.cumulative_profit,
                m.excitation_violations,
                fmt_opt(m.regret_vs_oracle),
                fmt_opt(m.tail_regret),
            ));
        }
        for &(i, j, pct) in &self.pairwise_profit_pct {
            out.push_str(&format!(
                "{} (seed {}) vs {} (seed {}): {:+.4}% profit\n",
                self.metrics[i].variant,
                self.metrics[i].seed,
                self.metrics[j].variant,
                self.metrics[j].seed,
                pct
            ));
        }
        out
    }
}

/// Compare traces recorded on one shared scenario. All traces must agree on
/// step count and availability schedule; regret columns appear when exactly
/// one trace is the oracle variant.
pub fn compare_report(traces: &[ScenarioTrace]) -> Result<CompareReport, HarnessError> {
    let first = traces
        .first()
        .ok_or_else(|| HarnessError::Config("no traces to compare".into()))?;
    for trace in &traces[1..] {
        if trace.rows.len() != first.rows.len() {
            return Err(HarnessError::Config(format!(
                "trace step counts differ: {} vs {}",
                first.rows.len(),
                trace.rows.len()
            )));
        }
        if let Some(row) = trace
            .rows
            .iter()
            .zip(&first.rows)
            .find(|(a, b)| a.cap != b.cap)
        {
            return Err(HarnessError::Config(format!(
                "availability schedules differ at step {}",
                row.0.step
            )));
        }
    }

    let oracle: Option<&ScenarioTrace> = {
        let mut oracles = traces.iter().filter(|t| t.variant == Variant::Oracle);
        match (oracles.next(), oracles.next()) {
            (Some(trace), None) => Some(trace),
            _ => None,
        }
    };

    let metrics = traces
        .iter()
        .map(|trace| {
            let warmup = trace.warmup();
            let excitation_violations = trace
                .rows
                .iter()
                .skip(warmup)
                .filter(|r| !r.excited)
                .count();
            let regret = oracle.map(|oracle| {
                trace
                    .rows
                    .iter()
                    .zip(&oracle.rows)
                    .map(|(r, o)| r.cost - o.cost)
                    .sum()
            });
            let tail_regret = oracle.map(|oracle| {
                let from = trace.rows.len() - trace.rows.len() / 10;
                trace.rows[from..]
                    .iter()
                    .zip(&oracle.rows[from..])
                    .map(|(r, o)| r.cost - o.cost)
                    .sum()
            });
            TraceMetrics {
                variant: trace.variant,
                seed: trace.seed,
                cumulative_profit: trace.cumulative_profit(),
                excitation_violations,
                regret_vs_oracle: regret,
                tail_regret,
            }
        })
        .collect::<Vec<_>>();

    let mut pairwise_profit_pct = Vec::new();
    for i in 0..metrics.len() {
        for j in i + 1..metrics.len() {
            let base = metrics[j].cumulative_profit;
            let pct = if base.abs() > 0.0 {
                100.0 * (metrics[i].cumulative_profit - base) / base.abs()
            } else {
                0.0
            };
            pairwise_profit_pct.push((i, j, pct));
        }
    }

    Ok(CompareReport {
        metrics,
        pairwise_profit_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::scenario::run_scenario;

    fn traces_for(variants: &[Variant], steps: usize) -> Vec<ScenarioTrace> {
        let mut config = ScenarioConfig::default();
        config.steps = steps;
        variants
            .iter()
            .map(|&variant| {
                config.variant = variant;
                run_scenario(&config).unwrap()
            })
            .collect()
    }

    #[test]
    fn identical_traces_differ_by_zero_percent() {
        let traces = traces_for(&[Variant::Plain, Variant::Plain], 10);
        let report = compare_report(&traces).unwrap();
        assert_eq!(report.pairwise_profit_pct.len(), 1);
        assert_eq!(report.pairwise_profit_pct[0].2, 0.0);
    }

    #[test]
    fn oracle_regret_is_zero_against_itself_and_signed_for_others() {
        let traces = traces_for(&[Variant::Oracle, Variant::Plain], 15);
        let report = compare_report(&traces).unwrap();
        assert_eq!(report.metrics[0].regret_vs_oracle, Some(0.0));
        let regret = report.metrics[1].regret_vs_oracle.unwrap();
        assert!(regret.is_finite());
        let rendered = report.render();
        assert_eq!(rendered.matches("oracle").count(), 2);
        assert!(rendered.contains("cum_profit"));
    }

    #[test]
    fn mismatched_step_counts_are_rejected() {
        let mut traces = traces_for(&[Variant::Plain], 10);
        traces.extend(traces_for(&[Variant::Plain], 12));
        assert!(matches!(
            compare_report(&traces),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn mismatched_schedules_are_rejected() {
        let mut config = ScenarioConfig::default();
        config.steps = 10;
        let a = run_scenario(&config).unwrap();
        config.schedule[0].cap = 1.9;
        let b = run_scenario(&config).unwrap();
        assert!(matches!(
            compare_report(&[a, b]),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(compare_report(&[]).is_err());
    }
}
