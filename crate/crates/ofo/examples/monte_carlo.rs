//! Seed sweep of the dithered controller: the per-step cost band the
//! randomized baseline produces, against the planned-excitation run that a
//! single seed fully determines.

use ofo::controller::Variant;
use ofo::harness::{monte_carlo, run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ScenarioConfig::default();
    config.variant = Variant::Gaussian;
    let runs = 64;
    let summary = monte_carlo(&config, runs)?;
    print!("{}", summary.render());

    for &step in &[50usize, 150, 250, 350, 450] {
        println!(
            "step {step:>3}: cost {:.4} +/- {:.4}",
            summary.mean_cost[step], summary.std_cost[step]
        );
    }

    config.variant = Variant::Pe;
    let pe = run_scenario(&config)?;
    println!(
        "planned excitation, one run: cumulative profit {:.4} vs dithered mean {:.4}",
        pe.cumulative_profit(),
        summary.mean_cumulative_profit()
    );
    Ok(())
}
