//! Self-contained SVG rendering of traces. Two figures: closed-loop cost
//! against the availability cap on a second axis, and the applied
//! perturbation per input element. No external assets; every series carries
//! a stable `id` (`cost-<variant>-<seed>`, `cap`, `s-<index>`) so
//! downstream tooling can address curves individually.

use super::scenario::ScenarioTrace;
use super::HarnessError;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 72.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        MARGIN_LEFT + (v - self.x_min) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-12);
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (1.0 - (v - self.y_min) / span) * h
    }
}

fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn polyline(points: &[(f64, f64)], color: &str, id: &str, dash: bool) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dash {
        " stroke-dasharray=\"6 3\""
    } else {
        ""
    };
    format!(
        "<polyline id=\"{id}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

fn document_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"system-ui, sans-serif\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n\
         <text x=\"{MARGIN_LEFT}\" y=\"24\" font-size=\"14\" fill=\"#202020\">{title}</text>\n"
    )
}

fn frame(out: &mut String, axes: &Axes, y_label: &str, x_label: &str) {
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;
    out.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#606060\"/>\n",
        right - left,
        bottom - top
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" fill=\"#202020\" transform=\"rotate(-90 16 {:.2})\">{y_label}</text>\n",
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#202020\" text-anchor=\"middle\">{x_label}</text>\n",
        (left + right) / 2.0,
        bottom + 32.0
    ));
    for i in 0..=4 {
        let fx = axes.x_min + (axes.x_max - axes.x_min) * i as f64 / 4.0;
        let px = axes.x(fx);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{bottom}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#606060\"/>\n",
            bottom + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#202020\" text-anchor=\"middle\">{fx:.0}</text>\n",
            bottom + 18.0
        ));
        let fy = axes.y_min + (axes.y_max - axes.y_min) * i as f64 / 4.0;
        let py = axes.y(fy);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{left}\" y2=\"{py:.2}\" stroke=\"#606060\"/>\n",
            left - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#202020\" text-anchor=\"end\">{}</text>\n",
            left - 8.0,
            py + 4.0,
            format_tick(fy)
        ));
    }
}

fn right_axis(out: &mut String, axes: &Axes, label: &str) {
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#707070\" transform=\"rotate(90 {:.2} {:.2})\">{label}</text>\n",
        WIDTH - 12.0,
        (top + bottom) / 2.0,
        WIDTH - 12.0,
        (top + bottom) / 2.0
    ));
    for i in 0..=4 {
        let fy = axes.y_min + (axes.y_max - axes.y_min) * i as f64 / 4.0;
        let py = axes.y(fy);
        out.push_str(&format!(
            "<line x1=\"{right}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#707070\"/>\n",
            right + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#707070\" text-anchor=\"start\">{}</text>\n",
            right + 8.0,
            py + 4.0,
            format_tick(fy)
        ));
    }
}

fn legend_entry(out: &mut String, slot: usize, color: &str, label: &str, dash: bool) {
    let lx = MARGIN_LEFT + 140.0 + 130.0 * slot as f64;
    if dash {
        out.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"20\" x2=\"{:.2}\" y2=\"20\" stroke=\"{color}\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>\n",
            lx + 12.0
        ));
    } else {
        out.push_str(&format!(
            "<rect x=\"{lx}\" y=\"14\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n"
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-size=\"12\" fill=\"#202020\">{label}</text>\n",
        lx + 16.0
    ));
}

fn format_tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 10000.0) {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

/// Closed-loop cost of every trace over steps, with the availability cap of
/// the first trace drawn against a second axis on the right.
pub fn cost_figure(traces: &[ScenarioTrace]) -> Result<String, HarnessError> {
    let first = traces
        .first()
        .filter(|t| !t.rows.is_empty())
        .ok_or_else(|| HarnessError::Config("no trace rows to plot".into()))?;

    let x_max = traces
        .iter()
        .flat_map(|t| t.rows.last())
        .map(|r| r.step as f64)
        .fold(1.0, f64::max);
    let costs: Vec<Vec<f64>> = traces.iter().map(ScenarioTrace::cost_series).collect();
    let (lo, hi) = extent(costs.iter().flatten());
    let axes = Axes {
        x_min: 0.0,
        x_max,
        y_min: lo,
        y_max: hi,
    };
    let caps: Vec<f64> = first.rows.iter().map(|r| r.cap).collect();
    let (cap_lo, cap_hi) = extent(caps.iter());
    let cap_axes = Axes {
        x_min: 0.0,
        x_max,
        y_min: cap_lo,
        y_max: cap_hi,
    };

    let mut out = document_open("closed-loop cost and availability");
    frame(&mut out, &axes, "cost", "step");
    right_axis(&mut out, &cap_axes, "availability cap");

    let points: Vec<(f64, f64)> = first
        .rows
        .iter()
        .map(|r| (cap_axes.x(r.step as f64), cap_axes.y(r.cap)))
        .collect();
    out.push_str(&polyline(&points, "#707070", "cap", true));
    legend_entry(&mut out, traces.len(), "#707070", "cap", true);

    for (i, trace) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = format!("{}-{}", trace.variant, trace.seed);
        let points: Vec<(f64, f64)> = trace
            .rows
            .iter()
            .zip(&costs[i])
            .map(|(r, &c)| (axes.x(r.step as f64), axes.y(c)))
            .collect();
        out.push_str(&polyline(&points, color, &format!("cost-{label}"), false));
        legend_entry(&mut out, i, color, &label, false);
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Applied perturbation of one trace, one series per input element, scaled
/// by `1/alpha` so the perturbation reads in gradient-step units. The
/// scaling exists only here; stored traces keep raw values.
pub fn perturbation_figure(trace: &ScenarioTrace, alpha: f64) -> Result<String, HarnessError> {
    if trace.rows.is_empty() {
        return Err(HarnessError::Config("no trace rows to plot".into()));
    }
    if !(alpha > 0.0) {
        return Err(HarnessError::Config(format!(
            "alpha must be positive, got {alpha}"
        )));
    }

    let x_max = trace.rows.last().map(|r| r.step as f64).unwrap_or(1.0);
    let series: Vec<Vec<f64>> = (0..trace.n_u)
        .map(|i| trace.rows.iter().map(|r| r.s[i] / alpha).collect())
        .collect();
    let (lo, hi) = extent(series.iter().flatten());
    let axes = Axes {
        x_min: 0.0,
        x_max,
        y_min: lo,
        y_max: hi,
    };

    let mut out = document_open(&format!(
        "perturbation per input ({}-{})",
        trace.variant, trace.seed
    ));
    frame(&mut out, &axes, "s / alpha", "step");
    for (i, values) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<(f64, f64)> = trace
            .rows
            .iter()
            .zip(values)
            .map(|(r, &v)| (axes.x(r.step as f64), axes.y(v)))
            .collect();
        out.push_str(&polyline(&points, color, &format!("s-{i}"), false));
        legend_entry(&mut out, i, color, &format!("s_{i}"), false);
    }

    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Variant;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::scenario::run_scenario;

    #[test]
    fn cost_figure_contains_every_trace_and_the_cap_series() {
        let mut config = ScenarioConfig::default();
        config.steps = 6;
        let mut traces = Vec::new();
        for variant in [Variant::Plain, Variant::Pe] {
            config.variant = variant;
            traces.push(run_scenario(&config).unwrap());
        }
        let svg = cost_figure(&traces).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("id=\"cost-plain-0\""));
        assert!(svg.contains("id=\"cost-pe-0\""));
        assert!(svg.contains("id=\"cap\""));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn perturbation_figure_has_one_series_per_input() {
        let mut config = ScenarioConfig::default();
        config.variant = Variant::Pe;
        config.steps = 6;
        let trace = run_scenario(&config).unwrap();
        let svg = perturbation_figure(&trace, config.params.alpha).unwrap();
        for i in 0..trace.n_u {
            assert!(svg.contains(&format!("id=\"s-{i}\"")), "series {i} missing");
        }
        assert!(!svg.contains(&format!("id=\"s-{}\"", trace.n_u)));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(cost_figure(&[]).is_err());
        let trace = ScenarioTrace {
            variant: Variant::Plain,
            seed: 0,
            n_u: 2,
            n_y: 3,
            rows: Vec::new(),
        };
        assert!(perturbation_figure(&trace, 1e-3).is_err());
    }
}
