//! Report, table and plot writers.

use std::fs;
use std::path::Path;

use plotters::prelude::*;
use serde_json::Value;

/// Column-oriented numeric table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), values.len(), "column lengths differ");
        }
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// One SVG line plot: `ys` against `x`, optionally on a log y axis.
#[derive(Debug, Clone)]
pub struct Plot {
    pub file: String,
    pub title: String,
    pub x: String,
    pub ys: Vec<String>,
    pub log_y: bool,
}

pub fn write_summary(dir: &Path, summary: &Value) -> Result<(), String> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| e.to_string())?;
    fs::write(dir.join("summary.json"), text + "\n").map_err(|e| format!("writing summary.json: {e}"))
}

pub fn write_csv(dir: &Path, table: &Table) -> Result<(), String> {
    let path = dir.join("timeseries.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    w.write_record(&table.names).map_err(|e| e.to_string())?;
    for i in 0..table.rows() {
        // `{:e}` prints the shortest exact round-trip representation
        w.write_record(table.columns.iter().map(|c| format!("{:e}", c[i]))).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

pub fn write_plot(dir: &Path, table: &Table, plot: &Plot) -> Result<(), String> {
    let x = table.column(&plot.x).ok_or_else(|| format!("no column {}", plot.x))?;
    let series: Vec<(&str, &[f64])> = plot
        .ys
        .iter()
        .filter_map(|n| table.column(n).map(|c| (n.as_str(), c)))
        .collect();
    let keep = |v: f64| v.is_finite() && (!plot.log_y || v > 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in &series {
        for &v in ys.iter().filter(|v| keep(**v)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return Ok(());
    }
    if hi <= lo {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo, hi) = if plot.log_y { (lo / 2.0, hi * 2.0) } else { (lo - pad, hi + pad) };
    }
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let path = dir.join(&plot.file);
    let root = SVGBackend::new(&path, (800, 500)).into_drawing_area();
    let draw = || -> Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let mut builder = ChartBuilder::on(&root);
        builder.caption(&plot.title, ("sans-serif", 20)).margin(12).x_label_area_size(40).y_label_area_size(70);
        macro_rules! body {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart.configure_mesh().x_desc(plot.x.as_str()).draw()?;
                for (k, (name, ys)) in series.iter().enumerate() {
                    let color = Palette99::pick(k).to_rgba();
                    let pts = x.iter().zip(ys.iter()).filter(|(_, v)| keep(**v)).map(|(&a, &b)| (a, b));
                    chart
                        .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
                        .label(*name)
                        .legend(move |(a, b)| PathElement::new(vec![(a, b), (a + 18, b)], color));
                }
                chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
            }};
        }
        if plot.log_y {
            body!(builder.build_cartesian_2d(x0..x1, (lo..hi).log_scale())?);
        } else {
            body!(builder.build_cartesian_2d(x0..x1, lo..hi)?);
        }
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| format!("plotting {}: {e}", plot.file))
}
