//! Step-by-step audit of the excitation machinery on a benchmark run:
//! margins against the window's blind direction, the perturbation
//! certificate residual, and the lifted complementarity product.

use ofo::harness::{run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig::default();
    let trace = run_scenario(&config)?;
    let warmup = trace.warmup();

    let mut worst_margin = f64::INFINITY;
    let mut worst_residual: f64 = 0.0;
    let mut unexcited = 0;
    for row in trace.rows.iter().skip(warmup) {
        if !row.excited {
            unexcited += 1;
            println!("step {:>3}: excitation missed (margin {:.3e})", row.step, row.margin);
        }
        worst_margin = worst_margin.min(row.margin);
        worst_residual = worst_residual.max(row.lower_residual);
    }

    println!("steps audited:        {}", trace.rows.len() - warmup);
    println!("excitation misses:    {unexcited}");
    println!("smallest margin:      {worst_margin:.3e} (floor {:.1e})", config.params.epsilon);
    println!("worst cert residual:  {worst_residual:.3e}");

    let s_bound = config.params.s_hi;
    let overshoot = trace
        .rows
        .iter()
        .flat_map(|r| r.s.iter())
        .map(|&s| (s.abs() - s_bound).max(0.0))
        .fold(0.0, f64::max);
    println!("perturbation bound overshoot: {overshoot:.3e}");
    Ok(())
}
