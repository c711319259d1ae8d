use std::fmt::Write as _;

use super::table::{Table, AGGREGATE_KIND};
use crate::stability::{RegionSweep, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub statistic: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<SeriesPoint>,
}

/// Curves to draw, with axis labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl PlotData {
    /// Reads an aggregate table (columns `series,x,n,statistic,lower,upper`).
    pub fn from_aggregate(table: &Table) -> Result<PlotData> {
        let meta = &table.metadata;
        if meta.kind != AGGREGATE_KIND {
            return Err(Error::InvalidArgument(format!(
                "expected an aggregate table, got kind {:?}",
                meta.kind
            )));
        }
        let sc = table.column("series")?;
        let xs = table.numeric_column("x")?;
        let stat = table.numeric_column("statistic")?;
        let lo = table.numeric_column("lower")?;
        let hi = table.numeric_column("upper")?;
        let mut series: Vec<Series> = Vec::new();
        for (i, row) in table.rows.iter().enumerate() {
            let name = if row[sc].is_empty() { "all".to_string() } else { row[sc].clone() };
            let point = SeriesPoint {
                x: xs[i],
                statistic: stat[i],
                lower: lo[i],
                upper: hi[i],
            };
            match series.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push(point),
                None => series.push(Series {
                    name,
                    points: vec![point],
                }),
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.x.total_cmp(&b.x));
        }
        Ok(PlotData {
            title: meta.experiment.clone(),
            x_label: meta.get("xlabel").unwrap_or("x").to_string(),
            y_label: format!(
                "{} of {}",
                meta.get("statistic").unwrap_or("statistic"),
                meta.get("ylabel").unwrap_or("y")
            ),
            series,
        })
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, log: bool, pixel_lo: f64, pixel_hi: f64) -> Scale {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(t(v)), b.max(t(v)))
        });
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale {
            lo,
            hi,
            log,
            pixel_lo,
            pixel_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        self.pixel_lo + (t - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let mut out: Vec<f64> = (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect();
            if out.len() < 2 {
                out = vec![10f64.powf(self.lo), 10f64.powf(self.hi)];
            }
            out
        } else {
            (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
        }
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders one polyline per series over a shaded band between the lower and
/// upper values, on linear or logarithmic axes.
pub fn emit_svg(data: &PlotData, axes: Axes) -> Result<String> {
    if data.series.is_empty() || data.series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidArgument("nothing to plot: a series is empty".into()));
    }
    for s in &data.series {
        for p in &s.points {
            let values = [p.x, p.statistic, p.lower, p.upper];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "series {:?} at x = {} has a non-finite value",
                    s.name, p.x
                )));
            }
            if axes.log_x && p.x <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log x axis: series {:?} has non-positive x = {}",
                    s.name, p.x
                )));
            }
            if axes.log_y {
                if let Some(v) = [p.statistic, p.lower, p.upper].into_iter().find(|v| *v <= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "log y axis: series {:?} at x = {} has non-positive value {v}",
                        s.name, p.x
                    )));
                }
            }
        }
    }
    let points = || data.series.iter().flat_map(|s| s.points.iter());
    let xs = Scale::new(points().map(|p| p.x), axes.log_x, LEFT, WIDTH - RIGHT);
    let ys = Scale::new(
        points().flat_map(|p| [p.statistic, p.lower, p.upper]),
        axes.log_y,
        HEIGHT - BOTTOM,
        TOP,
    );

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&data.title)
    );
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for t in xs.ticks() {
        let px = xs.map(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(t)
        );
    }
    for t in ys.ticks() {
        let py = ys.map(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&data.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(&data.y_label)
    );

    for (i, s) in data.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", xs.map(p.x), ys.map(p.upper)))
            .collect();
        band.extend(
            s.points
                .iter()
                .rev()
                .map(|p| format!("{:.2},{:.2}", xs.map(p.x), ys.map(p.lower))),
        );
        let line: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", xs.map(p.x), ys.map(p.statistic)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x1 + 15.0,
            x1 + 35.0,
            x1 + 40.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Heatmap of a `(d₁, p)` stability sweep: one cell per grid point,
/// coloured by verdict.
pub fn region_heatmap_svg(sweep: &RegionSweep) -> String {
    let n1 = sweep.d1_values.len();
    let n2 = sweep.p_values.len();
    let size = 400.0;
    let (cw, ch) = (size / n2 as f64, size / n1 as f64);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="520" height="480" viewBox="0 0 520 480" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="520" height="480" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g transform="translate(60 20)">"#);
    for i in 0..n1 {
        for j in 0..n2 {
            let color = match sweep.cell(i, j).verdict {
                Verdict::Stable => "#4575b4",
                Verdict::Marginal => "#ffffbf",
                Verdict::Divergent => "#d73027",
            };
            // d1 grows upwards, p to the right
            let _ = writeln!(
                svg,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{color}"/>"#,
                j as f64 * cw,
                size - (i + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<rect width="{size}" height="{size}" fill="none" stroke="black"/></g>"#
    );
    let _ = writeln!(svg, r#"<text x="260" y="450" text-anchor="middle">p</text>"#);
    let _ = writeln!(
        svg,
        r#"<text x="25" y="220" text-anchor="middle" transform="rotate(-90 25 220)">d1</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="260" y="470" text-anchor="middle">red: divergent, blue: stable (gamma = {}, alpha = {})</text>"#,
        sweep.discount, sweep.step_size
    );
    svg.push_str("</svg>\n");
    svg
}
