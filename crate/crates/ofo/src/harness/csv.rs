//! Trace serialization. The format is a stable contract for downstream
//! tooling:
//!
//! ```text
//! step,variant,seed,cap,cost,excited,margin,est_error,fp_iterations,u_0,...,y_0,...,s_0,...
//! ```
//!
//! One header row, one data row per step. `excited` is `0`/`1`, `variant` is
//! the lowercase variant name, floats are printed with 17 significant digits
//! so a read-back is bit exact. The `u_*`/`y_*`/`s_*` groups carry the input,
//! output, and perturbation vectors; their counts encode the problem
//! dimensions.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DVector;

use super::scenario::{ScenarioTrace, TraceRow};
use super::HarnessError;

const FIXED_COLUMNS: [&str; 9] = [
    "step",
    "variant",
    "seed",
    "cap",
    "cost",
    "excited",
    "margin",
    "est_error",
    "fp_iterations",
];

pub fn write_csv<W: Write>(trace: &ScenarioTrace, out: &mut W) -> std::io::Result<()> {
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..trace.n_u).map(|i| format!("u_{i}")));
    header.extend((0..trace.n_y).map(|i| format!("y_{i}")));
    header.extend((0..trace.n_u).map(|i| format!("s_{i}")));
    writeln!(out, "{}", header.join(","))?;

    for row in &trace.rows {
        write!(
            out,
            "{},{},{},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
            row.step,
            trace.variant,
            trace.seed,
            row.cap,
            row.cost,
            row.excited as u8,
            row.margin,
            row.est_error,
            row.fp_iterations,
        )?;
        for v in row.u.iter().chain(row.y.iter()).chain(row.s.iter()) {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_csv_file(trace: &ScenarioTrace, path: &Path) -> Result<(), HarnessError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(trace, &mut file)?;
    Ok(())
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<ScenarioTrace, HarnessError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Parse("empty trace file".into()))??;
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    let (n_u, n_y) = parse_header(&columns)?;

    let expected = FIXED_COLUMNS.len() + 2 * n_u + n_y;
    let mut rows = Vec::new();
    let mut variant = None;
    let mut seed = 0;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != expected {
            return Err(HarnessError::Parse(format!(
                "line {}: {} fields, expected {}",
                lineno + 2,
                fields.len(),
                expected
            )));
        }
        let fail = |what: &str| {
            HarnessError::Parse(format!("line {}: bad {what} field", lineno + 2))
        };
        let step: usize = fields[0].parse().map_err(|_| fail("step"))?;
        let row_variant = fields[1].parse().map_err(HarnessError::Parse)?;
        match variant {
            None => variant = Some(row_variant),
            Some(v) if v == row_variant => {}
            Some(v) => {
                return Err(HarnessError::Parse(format!(
                    "line {}: variant changed from {v} to {row_variant}",
                    lineno + 2
                )))
            }
        }
        seed = fields[2].parse().map_err(|_| fail("seed"))?;
        let float = |idx: usize, what: &str| -> Result<f64, HarnessError> {
            fields[idx].parse().map_err(|_| fail(what))
        };
        let take = |from: usize, len: usize| -> Result<DVector<f64>, HarnessError> {
            let mut v = DVector::zeros(len);
            for k in 0..len {
                v[k] = fields[from + k]
                    .parse()
                    .map_err(|_| fail(&format!("vector entry {}", from + k)))?;
            }
            Ok(v)
        };
        rows.push(TraceRow {
            step,
            cap: float(3, "cap")?,
            cost: float(4, "cost")?,
            excited: match fields[5] {
                "0" => false,
                "1" => true,
                _ => return Err(fail("excited")),
            },
            margin: float(6, "margin")?,
            est_error: float(7, "est_error")?,
            fp_iterations: fields[8].parse().map_err(|_| fail("fp_iterations"))?,
            // Solver-internal diagnostic, not part of the trace contract.
            lower_residual: 0.0,
            u: take(9, n_u)?,
            y: take(9 + n_u, n_y)?,
            s: take(9 + n_u + n_y, n_u)?,
        });
    }

    let variant =
        variant.ok_or_else(|| HarnessError::Parse("trace file has no data rows".into()))?;
    Ok(ScenarioTrace {
        variant,
        seed,
        n_u,
        n_y,
        rows,
    })
}

pub fn read_csv_file(path: &Path) -> Result<ScenarioTrace, HarnessError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_csv(file)
}

fn parse_header(columns: &[&str]) -> Result<(usize, usize), HarnessError> {
    if columns.len() < FIXED_COLUMNS.len() {
        return Err(HarnessError::Parse("header too short".into()));
    }
    for (found, expected) in columns.iter().zip(FIXED_COLUMNS.iter()) {
        if found != expected {
            return Err(HarnessError::Parse(format!(
                "header column '{found}' where '{expected}' was expected"
            )));
        }
    }
    let count = |prefix: &str| {
        columns
            .iter()
            .filter(|c| {
                c.strip_prefix(prefix)
                    .is_some_and(|rest| rest.parse::<usize>().is_ok())
            })
            .count()
    };
    let n_u = count("u_");
    let n_y = count("y_");
    let n_s = count("s_");
    if n_u == 0 || n_y == 0 || n_s != n_u {
        return Err(HarnessError::Parse(format!(
            "header vector groups inconsistent: {n_u} inputs, {n_y} outputs, {n_s} perturbations"
        )));
    }
    if columns.len() != FIXED_COLUMNS.len() + 2 * n_u + n_y {
        return Err(HarnessError::Parse("header has stray columns".into()));
    }
    Ok((n_u, n_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Variant;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::scenario::run_scenario;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut config = ScenarioConfig::default();
        config.steps = 8;
        config.variant = Variant::Pe;
        config.seed = 3;
        let trace = run_scenario(&config).unwrap();

        let mut buffer = Vec::new();
        write_csv(&trace, &mut buffer).unwrap();
        let back = read_csv(std::io::Cursor::new(buffer)).unwrap();

        assert_eq!(back.variant, trace.variant);
        assert_eq!(back.seed, trace.seed);
        assert_eq!(back.n_u, trace.n_u);
        assert_eq!(back.n_y, trace.n_y);
        assert_eq!(back.rows.len(), trace.rows.len());
        for (a, b) in trace.rows.iter().zip(&back.rows) {
            assert_eq!(a.step, b.step);
            assert_eq!(a.cap, b.cap);
            assert_eq!(a.cost, b.cost);
            assert_eq!(a.excited, b.excited);
            assert_eq!(a.margin, b.margin);
            assert_eq!(a.est_error, b.est_error);
            assert_eq!(a.fp_iterations, b.fp_iterations);
            assert_eq!(a.u, b.u);
            assert_eq!(a.y, b.y);
            assert_eq!(a.s, b.s);
        }
    }

    #[test]
    fn header_is_the_documented_contract() {
        let mut config = ScenarioConfig::default();
        config.steps = 1;
        config.variant = Variant::Plain;
        let trace = run_scenario(&config).unwrap();
        let mut buffer = Vec::new();
        write_csv(&trace, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with(
            "step,variant,seed,cap,cost,excited,margin,est_error,fp_iterations,u_0"
        ));
        assert!(header.ends_with("s_7"));
    }

    #[test]
    fn malformed_input_is_reported_not_panicked() {
        for text in [
            "",
            "step,variant\n",
            "step,variant,seed,cap,cost,excited,margin,est_error,fp_iterations,u_0,y_0,s_0\n0,plain,0,bad,0,0,0,0,0,0,0,0\n",
            "step,variant,seed,cap,cost,excited,margin,est_error,fp_iterations,u_0,y_0,s_0\n0,plain,0,0,0,0,0,0,0\n",
        ] {
            assert!(read_csv(std::io::Cursor::new(text.as_bytes())).is_err());
        }
    }
}
