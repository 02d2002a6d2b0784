//! Deterministic SVG line charts for bias timelines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::temporal::{LaborSeries, TimeSeriesPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One `|bias|` series per category (x = slice start year), plus the labor
/// slant at each slice midpoint when a labor series is given.
pub fn timeline_plot_series(points: &[TimeSeriesPoint], labor: Option<&LaborSeries>) -> Vec<PlotSeries> {
    let mut out: Vec<PlotSeries> = Vec::new();
    for p in points {
        let name = format!("|bias| {}", p.category);
        let xy = (p.slice_start as f64, p.abs_bias);
        match out.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(xy),
            None => out.push(PlotSeries { name, points: vec![xy] }),
        }
    }
    if let Some(labor) = labor {
        let mut slices: Vec<(i32, i32)> = points.iter().map(|p| (p.slice_start, p.slice_end)).collect();
        slices.sort_unstable();
        slices.dedup();
        out.push(PlotSeries {
            name: "labor slant".into(),
            points: slices
                .into_iter()
                .map(|(s, e)| (s as f64, labor.slant_for_slice(s, e)))
                .collect(),
        });
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the chart. Output depends only on the inputs; `comment` is
/// embedded verbatim (escaped) as an XML comment when given.
pub fn render_svg(series: &[PlotSeries], title: &str, comment: Option<&str>) -> Result<String> {
    let total: usize = series.iter().map(|s| s.points.len()).sum();
    if total < 2 {
        return Err(Error::Plot(format!("need at least 2 points to plot, got {total}")));
    }
    if series.iter().flat_map(|s| &s.points).any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Plot("series contain non-finite values".into()));
    }
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if let Some(c) = comment {
        let _ = writeln!(svg, "<!-- {} -->", escape(c).replace("--", "- -"));
    }
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="black"/>"#,
        l = MARGIN_LEFT,
        r = MARGIN_LEFT + pw,
        b = MARGIN_TOP + ph
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}" stroke="black"/>"#,
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + ph
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.0}</text>"#,
            sx(xv),
            MARGIN_TOP + ph + 18.0,
            xv
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">year</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.2})">value</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 * i as f64 + 8.0;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(series: &[PlotSeries], title: &str, comment: Option<&str>, path: &Path) -> Result<()> {
    let svg = render_svg(series, title, comment)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
