use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use plotters::prelude::*;

use crate::experiment::{ResultRow, ResultTable};

/// Writes data rows then GEOMEAN rows. An empty table is an error.
pub fn write_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    if table.is_empty() {
        bail!("experiment '{}' produced no rows", table.name);
    }
    let mut w = csv::Writer::from_writer(out);
    for r in table.rows.iter().chain(&table.summary) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(table: &ResultTable) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(table, std::io::BufWriter::new(f))
}

fn of<'a>(table: &'a ResultTable, f: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
    table.summary.iter().filter(move |r| r.format == f)
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

fn series(table: &ResultTable) -> (Vec<Series>, String, Vec<String>) {
    let mut formats: Vec<String> = Vec::new();
    for r in &table.summary {
        if !formats.contains(&r.format) {
            formats.push(r.format.clone());
        }
    }
    let x = |r: &ResultRow| r.sweep_value.map(|v| (v as f64).log2());
    match table.sweep.as_str() {
        "none" => {
            let pts = formats
                .iter()
                .enumerate()
                .map(|(i, f)| (i as f64, of(table, f).next().map_or(0.0, |r| r.speedup)))
                .collect();
            let s = Series { label: "geomean speedup".into(), points: pts, dashed: false };
            (vec![s], "format".into(), formats)
        }
        axis => {
            let mut out = Vec::new();
            // Unswept formats have no x position.
            for f in formats.iter().filter(|f| of(table, f).any(|r| r.sweep_value.is_some())) {
                out.push(Series {
                    label: f.clone(),
                    points: of(table, f).filter_map(|r| Some((x(r)?, r.speedup))).collect(),
                    dashed: false,
                });
                if axis == "processors" {
                    out.push(Series {
                        label: format!("{f} ideal"),
                        points: of(table, f).filter_map(|r| Some((x(r)?, r.ideal_speedup?))).collect(),
                        dashed: true,
                    });
                }
            }
            (out, axis.to_string(), Vec::new())
        }
    }
}

/// Geomean speedup per format (no sweep) or against the sweep value on a
/// log2 axis.
pub fn emit_plot(table: &ResultTable, path: &Path) -> Result<()> {
    if table.is_empty() {
        bail!("experiment '{}' produced no rows", table.name);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let (series, x_label, categories) = series(table);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y1) = (f64::MAX, f64::MIN, 0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        bail!("experiment '{}' has no swept format to plot", table.name);
    }
    let (x0, x1) = (x0 - 0.5, x1 + 0.5);
    let y1 = if y1.is_finite() && y1 > 0.0 { y1 * 1.1 } else { 1.0 };

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&table.name, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, 0f64..y1)?;
    let cats = categories.clone();
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("speedup")
        .x_label_formatter(&move |v: &f64| {
            let i = v.round();
            if (v - i).abs() > 1e-6 || i < 0.0 {
                String::new()
            } else if cats.is_empty() {
                format!("{}", 1u64 << i as u32)
            } else {
                cats.get(i as usize).cloned().unwrap_or_default()
            }
        })
        .draw()?;

    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(if s.dashed { i - 1 } else { i }).to_rgba();
        let style = if s.dashed { color.stroke_width(1) } else { color.stroke_width(2) };
        if s.dashed {
            chart.draw_series(DashedLineSeries::new(s.points.iter().copied(), 6, 4, style))?;
        } else if categories.is_empty() {
            chart.draw_series(LineSeries::new(s.points.iter().copied(), style))?;
        }
        let anno = chart.draw_series(
            s.points.iter().map(|&p| Circle::new(p, 4, color.filled())),
        )?;
        anno.label(&s.label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
