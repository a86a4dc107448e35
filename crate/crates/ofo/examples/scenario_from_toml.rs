//! Configs are plain TOML; every omitted key falls back to the benchmark
//! default. This one shortens the horizon, tightens the budget early, and
//! starts from a custom operating point.

use ofo::harness::ScenarioConfig;

const CONFIG: &str = r#"
name = "tight-budget"
variant = "pe"
steps = 120
seed = 11
initial_input = [0.2, 0.6, 0.2, 0.6, 0.2, 0.6, 0.2, 0.6]

[[schedule]]
step = 0
cap = 1.5

[[schedule]]
step = 60
cap = 1.0
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig::from_toml(CONFIG)?;
    let trace = ofo::harness::run_scenario(&config)?;

    println!("{}: {} steps", config.name, trace.rows.len());
    for step in [0, 59, 60, 119] {
        let row = &trace.rows[step];
        let injected: f64 = row.u.iter().step_by(2).sum();
        println!(
            "step {step:>3}: cap {:.1}, injected {:.4}, cost {:+.4}",
            row.cap, injected, row.cost
        );
    }
    println!("cumulative profit {:.4}", trace.cumulative_profit());
    Ok(())
}
