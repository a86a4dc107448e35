//! One closed-loop run of the excitation-planning controller on the
//! four-well benchmark, with a trace CSV written next to the binary's
//! working directory.

use ofo::harness::{run_scenario, write_csv_file, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig::default();
    let trace = run_scenario(&config)?;

    println!(
        "{} steps, cumulative profit {:.4}",
        trace.rows.len(),
        trace.cumulative_profit()
    );
    println!(
        "excitation rate after warm-up: {:.1}%",
        100.0 * trace.excitation_rate(trace.warmup())
    );

    let last = trace.rows.last().unwrap();
    let injections: Vec<f64> = last.u.iter().copied().step_by(2).collect();
    let chokes: Vec<f64> = last.u.iter().copied().skip(1).step_by(2).collect();
    println!("final injections: {injections:.3?} (cap {})", last.cap);
    println!("final chokes:     {chokes:.3?}");

    let path = std::path::Path::new("pe-trace.csv");
    write_csv_file(&trace, path)?;
    println!("trace written to {}", path.display());
    Ok(())
}
