//! Command-line front end over the simulation harness.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure, 3 I/O failure. Log verbosity comes from `RUST_LOG`
//! (e.g. `RUST_LOG=debug`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use ofo::harness::{
    compare_report, cost_figure, monte_carlo, perturbation_figure, read_csv_file, run_scenario,
    write_csv_file, HarnessError, ScenarioConfig, ScenarioTrace,
};

#[derive(Parser)]
#[command(name = "ofo", version, about = "Closed-loop feedback optimization runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace as CSV.
    Run {
        /// Scenario config (TOML).
        config: PathBuf,
        /// Directory the trace is written into.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep seeds over one scenario and print summary statistics.
    Montecarlo {
        /// Scenario config (TOML); seeds count up from the config's seed.
        config: PathBuf,
        /// Number of runs.
        #[arg(long)]
        runs: usize,
        /// Optional CSV of per-seed cumulative profits.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare recorded traces: profits, pairwise differences, regret.
    Compare {
        /// Trace CSV files; include an oracle trace for regret columns.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Render recorded traces as SVG figures.
    Plot {
        /// Trace CSV files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Directory the figures are written into.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Step size used to rescale perturbations into gradient-step units.
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
    },
    /// Parse and validate a scenario config without running it.
    Validate {
        /// Scenario config (TOML).
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, out, seed } => {
            let mut config = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let trace = run_scenario(&config)?;
            let path = out.join(trace_filename(&trace));
            write_csv_file(&trace, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Montecarlo { config, runs, out } => {
            let config = ScenarioConfig::load(&config)?;
            let summary = monte_carlo(&config, runs)?;
            print!("{}", summary.render());
            if let Some(path) = out {
                let mut text = String::from("seed,cumulative_profit\n");
                for (seed, profit) in &summary.profits {
                    text.push_str(&format!("{seed},{profit:.16e}\n"));
                }
                std::fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare { traces } => {
            let traces = read_traces(&traces)?;
            let report = compare_report(&traces)?;
            print!("{}", report.render());
            Ok(())
        }
        Command::Plot { traces, out, alpha } => {
            let traces = read_traces(&traces)?;
            let path = out.join("cost.svg");
            std::fs::write(&path, cost_figure(&traces)?)?;
            println!("wrote {}", path.display());
            for trace in &traces {
                let figure = perturbation_figure(trace, alpha)?;
                let path = out.join(format!("perturbation-{}-{}.svg", trace.variant, trace.seed));
                std::fs::write(&path, figure)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let config = ScenarioConfig::load(&config)?;
            config.validate()?;
            println!(
                "ok: {} variant {} for {} steps",
                config.name, config.variant, config.steps
            );
            Ok(())
        }
    }
}

fn trace_filename(trace: &ScenarioTrace) -> String {
    format!("{}-{}.csv", trace.variant, trace.seed)
}

fn read_traces(paths: &[PathBuf]) -> Result<Vec<ScenarioTrace>, HarnessError> {
    paths.iter().map(|p| read_csv_file(Path::new(p))).collect()
}
