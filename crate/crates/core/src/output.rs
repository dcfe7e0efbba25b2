//! Result, grid and simulation CSV files, metadata records and SVG heatmaps.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::discretize::Abstraction;
use crate::error::{PcisError, Result};
use crate::finite_horizon::PcisResult;
use crate::model::DiscreteModel;
use crate::sim::SimReport;

fn csv_err(e: csv::Error) -> PcisError {
    PcisError::Io(std::io::Error::other(e.to_string()))
}

fn opt(p: Option<f64>) -> String {
    p.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per model state: `state_id,probability,in_set`. States never
/// evaluated have an empty probability.
pub fn write_result_csv<W: Write>(out: W, model: &DiscreteModel, result: &PcisResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state_id", "probability", "in_set"]).map_err(csv_err)?;
    for x in 0..model.num_states() {
        let p = opt(result.probability(x));
        let inside = if result.set.contains(x) { "1" } else { "0" };
        w.write_record([model.state_name(x), p.as_str(), inside])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid cell with its bounds and representative:
/// `cell,lo_0..,hi_0..,rep_0..,probability,in_set`.
pub fn write_grid_csv<W: Write>(out: W, abs: &Abstraction, result: &PcisResult) -> Result<()> {
    let grid = &abs.states;
    let d = grid.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell".to_string()];
    for prefix in ["lo", "hi", "rep"] {
        header.extend((0..d).map(|i| format!("{prefix}_{i}")));
    }
    header.push("probability".into());
    header.push("in_set".into());
    w.write_record(&header).map_err(csv_err)?;
    for c in 0..grid.len() {
        let b = grid.cell_box(c);
        let mut rec = vec![abs.model.state_name(c).to_string()];
        rec.extend(b.lo().iter().map(f64::to_string));
        rec.extend(b.hi().iter().map(f64::to_string));
        rec.extend(grid.representative(c).iter().map(f64::to_string));
        rec.push(opt(result.probability(c)));
        rec.push(if result.set.contains(c) { "1" } else { "0" }.into());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `state,computed_p,empirical_p,ci_halfwidth,verdict`.
pub fn write_sim_csv<W: Write>(out: W, report: &SimReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "computed_p", "empirical_p", "ci_halfwidth", "verdict"])
        .map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.state.clone(),
            opt(r.computed_p),
            r.empirical_p.to_string(),
            r.ci_halfwidth.to_string(),
            r.verdict.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar describing a run.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub source: &'a str,
    pub epsilon: f64,
    pub threshold: f64,
    pub horizon: String,
    pub method: String,
    pub certification: crate::finite_horizon::Certification,
    pub iterations: usize,
    pub trace: &'a [usize],
    pub set_size: usize,
    pub set: Vec<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0_delta: Option<f64>,
    pub diagnostics: &'a [String],
    /// Command-specific settings (grid, solver, seed, ...).
    pub settings: serde_json::Value,
}

impl<'a> Metadata<'a> {
    pub fn new(
        command: &'a str,
        source: &'a str,
        model: &'a DiscreteModel,
        result: &'a PcisResult,
        settings: serde_json::Value,
    ) -> Self {
        Self {
            command,
            source,
            epsilon: result.epsilon,
            threshold: result.threshold,
            horizon: result.horizon.to_string(),
            method: result.method.to_string(),
            certification: result.certification,
            iterations: result.iterations,
            trace: &result.trace,
            set_size: result.set.len(),
            set: result.set.iter().map(|x| model.state_name(x)).collect(),
            tau0_delta: result.tau0_delta,
            diagnostics: &result.diagnostics,
            settings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Piecewise-linear blue → green → yellow scale on [0, 1].
pub fn color(p: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let p = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.0 };
    let i = STOPS.iter().rposition(|s| s.0 <= p).unwrap().min(STOPS.len() - 2);
    let (a, ca) = STOPS[i];
    let (b, cb) = STOPS[i + 1];
    let t = (p - a) / (b - a);
    let c: Vec<u8> = (0..3).map(|k| (ca[k] + t * (cb[k] - ca[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 40.0;

/// Heatmap of the cell probabilities for 1-D and 2-D grids; cells outside the
/// final set are drawn faded. `None` for higher dimensions.
pub fn heatmap_svg(abs: &Abstraction, result: &PcisResult, title: &str) -> Option<String> {
    let grid = &abs.states;
    let d = grid.dim();
    if d > 2 || grid.is_empty() {
        return None;
    }
    let all: Vec<_> = (0..grid.len()).map(|c| grid.cell_box(c)).collect();
    let lo: Vec<f64> = (0..d)
        .map(|a| all.iter().map(|b| b.lo()[a]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|a| all.iter().map(|b| b.hi()[a]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let plot = WIDTH - 2.0 * MARGIN;
    let sx = plot / (hi[0] - lo[0]);
    let (plot_h, sy) = if d == 2 {
        let sy = plot / (hi[1] - lo[1]);
        (plot, sy)
    } else {
        (plot / 4.0, 0.0)
    };
    let height = plot_h + 2.0 * MARGIN + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    for (c, b) in all.iter().enumerate() {
        let x = MARGIN + (b.lo()[0] - lo[0]) * sx;
        let w = (b.hi()[0] - b.lo()[0]) * sx;
        let (y, h) = if d == 2 {
            (MARGIN + (hi[1] - b.hi()[1]) * sy, (b.hi()[1] - b.lo()[1]) * sy)
        } else {
            (MARGIN, plot_h)
        };
        let (fill, opacity) = match result.probability(c) {
            Some(p) => (color(p), if result.set.contains(c) { 1.0 } else { 0.3 }),
            None => ("#dddddd".to_string(), 1.0),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="{fill}" fill-opacity="{opacity}"/>"#
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let base = MARGIN + plot_h + 18.0;
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{base}" font-family="sans-serif" font-size="12">{}</text>"#,
        lo[0]
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{base}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
        MARGIN + plot,
        hi[0]
    );
    s.push_str("</svg>\n");
    Some(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
