//! All four controller variants on the shared benchmark scenario, reduced
//! to the comparison table: cumulative profit, pairwise percentages, and
//! regret against the oracle.

use ofo::controller::Variant;
use ofo::harness::{compare_report, run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut traces = Vec::new();
    for variant in [Variant::Oracle, Variant::Plain, Variant::Gaussian, Variant::Pe] {
        let mut config = ScenarioConfig::default();
        config.variant = variant;
        traces.push(run_scenario(&config)?);
    }

    let report = compare_report(&traces)?;
    print!("{}", report.render());
    Ok(())
}
