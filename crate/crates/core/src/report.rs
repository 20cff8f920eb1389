//! Static SVG figures: jittered scatter, density heatmap and line charts.
//!
//! Output is plain SVG 1.1 built by string formatting. Coordinates are
//! printed with fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{DistanceRow, DistanceSeries, PcaProjection};
use crate::dataset::AnalysisMatrix;
use crate::error::{Error, Result};
use crate::mixture::{log_mixture_density, MixtureModel};
use crate::rng;
use crate::selection::{SweepReport, XvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Scatter,
    Density,
    AicCurve,
    DistanceSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    #[serde(default = "default_jitter")]
    pub jitter_halfwidth: f64,
    pub width: u32,
    pub height: u32,
    /// Seeds the jitter.
    #[serde(default)]
    pub seed: u64,
}

fn default_jitter() -> f64 {
    0.25
}

impl PlotSpec {
    pub fn new(kind: PlotKind) -> Self {
        let (width, height) = match kind {
            PlotKind::Scatter | PlotKind::Density => (640, 640),
            PlotKind::AicCurve | PlotKind::DistanceSeries => (720, 480),
        };
        Self {
            kind,
            jitter_halfwidth: default_jitter(),
            width,
            height,
            seed: 0,
        }
    }

    pub fn with_jitter(mut self, halfwidth: f64) -> Self {
        self.jitter_halfwidth = halfwidth;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.jitter_halfwidth) {
            return Err(Error::InvalidArgument(format!(
                "jitter_halfwidth must be in [0, 0.5), got {}",
                self.jitter_halfwidth
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("plot dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Party-strength colors, 1 (strong Democrat) through 7 (strong Republican).
pub const PARTY_COLORS: [&str; 7] = [
    "#08306b", "#2171b5", "#6baed6", "#969696", "#fc9272", "#de2d26", "#67000d",
];

pub const PARTY_STRENGTH_LABELS: [&str; 7] = [
    "Strong Democrat",
    "Weak Democrat",
    "Independent-Democrat",
    "Independent",
    "Independent-Republican",
    "Weak Republican",
    "Strong Republican",
];

fn party_color(strength: u8) -> &'static str {
    match strength {
        1..=7 => PARTY_COLORS[strength as usize - 1],
        _ => PARTY_COLORS[3],
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

const MARGIN: f64 = 60.0;

/// Maps data coordinates to pixels inside a margin; y grows upward.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), spec: &PlotSpec) -> Self {
        Self {
            x0: x.0,
            x1: x.1,
            y0: y.0,
            y1: y.1,
            width: spec.width as f64,
            height: spec.height as f64,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.width - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.height - 2.0 * MARGIN)
    }

    fn sx(&self) -> f64 {
        (self.width - 2.0 * MARGIN) / (self.x1 - self.x0)
    }

    fn sy(&self) -> f64 {
        (self.height - 2.0 * MARGIN) / (self.y1 - self.y0)
    }
}

fn open_svg(spec: &PlotSpec, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
    s
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn draw_axes(s: &mut String, f: &Frame, xticks: &[f64], yticks: &[f64], xlabel: &str, ylabel: &str) {
    let (left, right) = (MARGIN, f.width - MARGIN);
    let (top, bottom) = (MARGIN, f.height - MARGIN);
    let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(s, r#"<line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="ticks" font-family="sans-serif" font-size="11">"#);
    for &t in xticks {
        let x = f.px(t);
        let _ = writeln!(
            s,
            r#"<line class="xtick" x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            format_tick(t)
        );
    }
    for &t in yticks {
        let y = f.py(t);
        let _ = writeln!(
            s,
            r#"<line class="ytick" x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            format_tick(t)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        (left + right) / 2.0,
        f.height - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="15" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 15 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(ylabel)
    );
}

fn linear_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn star_points(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|i| {
            let radius = if i % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * (i as f64 / 5.0) - std::f64::consts::FRAC_PI_2;
            format!("{:.2},{:.2}", cx + radius * a.cos(), cy + radius * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn triangle_points(cx: f64, cy: f64, r: f64) -> String {
    [(0.0, -r), (0.866 * r, 0.5 * r), (-0.866 * r, 0.5 * r)]
        .iter()
        .map(|(dx, dy)| format!("{:.2},{:.2}", cx + dx, cy + dy))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A labeled point drawn as a triangle, typically a party mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub label: String,
    pub position: Vec<f64>,
}

impl Marker {
    pub fn new(label: impl Into<String>, position: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            position,
        }
    }
}

/// Jittered respondent scatter colored by party strength, with cluster
/// means as stars and party means as triangles. Data with more than two
/// issues must come with a projection.
pub fn render_scatter(
    data: &AnalysisMatrix,
    model: &MixtureModel,
    party_means: &[Marker],
    projection: Option<&PcaProjection>,
    spec: &PlotSpec,
) -> Result<String> {
    spec.validate()?;
    if model.dims() != data.dims() {
        return Err(Error::DimensionMismatch {
            expected: data.dims(),
            actual: model.dims(),
        });
    }
    let to_plane = |x: &[f64]| -> [f64; 2] {
        match projection {
            Some(p) => p.project(x),
            None => [x[0], x[1]],
        }
    };
    if projection.is_none() && data.dims() != 2 {
        return Err(Error::Unsupported(format!(
            "scatter of {}-dimensional data needs a 2-D projection",
            data.dims()
        )));
    }

    let mut rng = rng::seeded(spec.seed);
    let h = spec.jitter_halfwidth;
    let points: Vec<[f64; 2]> = data
        .rows()
        .map(|x| {
            let [a, b] = to_plane(x);
            if h > 0.0 {
                [a + rng.random_range(-h..=h), b + rng.random_range(-h..=h)]
            } else {
                [a, b]
            }
        })
        .collect();
    let centers: Vec<[f64; 2]> = model.means().iter().map(|m| to_plane(m)).collect();
    let parties: Vec<[f64; 2]> = party_means.iter().map(|m| to_plane(&m.position)).collect();

    let (xr, yr) = match projection {
        None => ((0.5, 7.5), (0.5, 7.5)),
        Some(_) => {
            let all = points.iter().chain(&centers).chain(&parties);
            let (mut x0, mut x1, mut y0, mut y1) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in all {
                x0 = x0.min(p[0]);
                x1 = x1.max(p[0]);
                y0 = y0.min(p[1]);
                y1 = y1.max(p[1]);
            }
            (pad_range(x0, x1), pad_range(y0, y1))
        }
    };
    let frame = Frame::new(xr, yr, spec);
    let (xlabel, ylabel) = match projection {
        None => (data.issue_labels()[0].clone(), data.issue_labels()[1].clone()),
        Some(_) => ("PC1".to_string(), "PC2".to_string()),
    };

    let mut s = open_svg(spec, "Respondent positions");
    let ticks = |r: (f64, f64)| match projection {
        None => (1..=7).map(f64::from).collect::<Vec<_>>(),
        Some(_) => linear_ticks(r.0, r.1, 5),
    };
    draw_axes(&mut s, &frame, &ticks(xr), &ticks(yr), &xlabel, &ylabel);

    let _ = writeln!(s, r#"<g class="points" fill-opacity="0.6">"#);
    for (p, strength) in points.iter().zip(data.party_strength()) {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
            frame.px(p[0]),
            frame.py(p[1]),
            party_color(*strength)
        );
    }
    let _ = writeln!(s, "</g>");
    for (i, c) in centers.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polygon class="cluster-mean" data-component="{}" points="{}" fill="gold" stroke="black"/>"#,
            i + 1,
            star_points(frame.px(c[0]), frame.py(c[1]), 11.0)
        );
    }
    for (m, p) in party_means.iter().zip(&parties) {
        let _ = writeln!(
            s,
            r#"<polygon class="party-mean" data-label="{}" points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            escape(&m.label),
            triangle_points(frame.px(p[0]), frame.py(p[1]), 9.0)
        );
    }
    draw_party_legend(&mut s, spec);
    s.push_str("</svg>\n");
    Ok(s)
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn draw_party_legend(s: &mut String, spec: &PlotSpec) {
    let x = spec.width as f64 - MARGIN - 150.0;
    let _ = writeln!(s, r#"<g class="legend" font-family="sans-serif" font-size="10">"#);
    for (i, (color, label)) in PARTY_COLORS.iter().zip(PARTY_STRENGTH_LABELS).enumerate() {
        let y = MARGIN + 12.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><rect x="{x:.2}" y="{:.2}" width="8" height="8" fill="{color}"/><text x="{:.2}" y="{:.2}">{label}</text></g>"#,
            y,
            x + 12.0,
            y + 8.0
        );
    }
    let _ = writeln!(s, "</g>");
}

pub const DENSITY_GRID: usize = 141;
pub const DENSITY_RANGE: (f64, f64) = (0.5, 7.5);
const DENSITY_LEVELS: usize = 24;

/// Mixture density sampled on a square grid; `values[row][col]` is the
/// density at `(xs[col], ys[row])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (r, row) in self.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if *v > self.values[best.0][best.1] {
                    best = (r, c);
                }
            }
        }
        best
    }
}

pub fn density_grid(model: &MixtureModel) -> Result<DensityGrid> {
    if model.dims() != 2 {
        return Err(Error::Unsupported(format!(
            "density plot needs D = 2, model has D = {}",
            model.dims()
        )));
    }
    let step = (DENSITY_RANGE.1 - DENSITY_RANGE.0) / (DENSITY_GRID - 1) as f64;
    let axis: Vec<f64> = (0..DENSITY_GRID).map(|i| DENSITY_RANGE.0 + step * i as f64).collect();
    let values = axis
        .iter()
        .map(|&y| {
            axis.iter()
                .map(|&x| log_mixture_density(&[x, y], model).map(f64::exp))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityGrid {
        xs: axis.clone(),
        ys: axis,
        values,
    })
}

fn shade(level: usize) -> String {
    let t = level as f64 / DENSITY_LEVELS as f64;
    let c = (255.0 * (1.0 - 0.85 * t)).round() as u8;
    let b = (255.0 * (1.0 - 0.45 * t)).round() as u8;
    format!("#{c:02x}{c:02x}{b:02x}")
}

/// Shaded density heatmap with 1σ and 2σ ellipses for each component.
pub fn render_density(model: &MixtureModel, labels: &[String], spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let grid = density_grid(model)?;
    let frame = Frame::new(DENSITY_RANGE, DENSITY_RANGE, spec);
    let step = grid.xs[1] - grid.xs[0];
    let max = grid.max();
    let level = |v: f64| -> usize {
        if max > 0.0 {
            ((v / max) * DENSITY_LEVELS as f64).floor().min(DENSITY_LEVELS as f64) as usize
        } else {
            0
        }
    };

    let mut s = open_svg(spec, "Mixture density");
    let _ = writeln!(s, r#"<g class="heatmap" shape-rendering="crispEdges">"#);
    for (r, row) in grid.values.iter().enumerate() {
        let y_top = frame.py(grid.ys[r] + step / 2.0);
        let cell_h = step * frame.sy();
        let mut c = 0;
        while c < row.len() {
            let lv = level(row[c]);
            let start = c;
            while c < row.len() && level(row[c]) == lv {
                c += 1;
            }
            if lv == 0 {
                continue;
            }
            let x_left = frame.px(grid.xs[start] - step / 2.0);
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{x_left:.2}" y="{y_top:.2}" width="{:.2}" height="{cell_h:.2}" fill="{}"/>"#,
                (c - start) as f64 * step * frame.sx(),
                shade(lv)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="ellipses" fill="none" stroke="black">"#);
    for (i, (m, v)) in model.means().iter().zip(model.variances()).enumerate() {
        for sigma in [1.0, 2.0] {
            let _ = writeln!(
                s,
                r#"<ellipse class="sigma{}" data-component="{}" cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}"{}/>"#,
                sigma as u8,
                i + 1,
                frame.px(m[0]),
                frame.py(m[1]),
                sigma * v[0].sqrt() * frame.sx(),
                sigma * v[1].sqrt() * frame.sy(),
                if sigma > 1.0 { r#" stroke-dasharray="4 3""# } else { "" }
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let ticks: Vec<f64> = (1..=7).map(f64::from).collect();
    let label = |d: usize| labels.get(d).cloned().unwrap_or_else(|| format!("x{}", d + 1));
    draw_axes(&mut s, &frame, &ticks, &ticks, &label(0), &label(1));
    s.push_str("</svg>\n");
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const SERIES_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart with one polyline per series. Every vertex carries its
/// exact values in `data-x` / `data-y`.
pub fn render_curves(chart: &Chart, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let all: Vec<(f64, f64)> = chart.series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::InvalidArgument("chart has no points".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let xr = pad_range(x0, x1);
    let yr = pad_range(y0, y1);
    let frame = Frame::new(xr, yr, spec);

    let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let xticks = if xs.len() <= 25 && xs.iter().all(|x| x.fract() == 0.0) {
        xs
    } else {
        linear_ticks(x0, x1, 6)
    };
    let yticks = if y1 > y0 { linear_ticks(y0, y1, 5) } else { vec![y0] };

    let mut s = open_svg(spec, &chart.title);
    draw_axes(&mut s, &frame, &xticks, &yticks, &chart.x_label, &chart.y_label);
    for (i, series) in chart.series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let path: Vec<String> = series
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<g class="series-group" data-name="{}">"#,
            escape(&series.name)
        );
        let _ = writeln!(
            s,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in &series.points {
            let _ = writeln!(
                s,
                r#"<circle class="vertex" cx="{:.2}" cy="{:.2}" r="3" fill="{color}" data-x="{x}" data-y="{y}"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g class="legend" font-family="sans-serif" font-size="11">"#);
    for (i, series) in chart.series.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = spec.width as f64 - MARGIN - 170.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            y - 4.0,
            x + 16.0,
            y - 4.0,
            SERIES_COLORS[i % SERIES_COLORS.len()],
            x + 20.0,
            y,
            escape(&series.name)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// AIC and BIC against k for the successful sweep entries.
pub fn sweep_chart(report: &SweepReport) -> Chart {
    let ok: Vec<_> = report.successful().collect();
    Chart {
        title: "Information criteria by number of clusters".into(),
        x_label: "number of clusters k".into(),
        y_label: "criterion value".into(),
        series: vec![
            Series {
                name: "AIC".into(),
                points: ok.iter().filter_map(|e| Some((e.k as f64, e.aic?))).collect(),
            },
            Series {
                name: "BIC".into(),
                points: ok.iter().filter_map(|e| Some((e.k as f64, e.bic?))).collect(),
            },
        ],
    }
}

/// Mean held-out AIC against k.
pub fn xval_chart(report: &XvalReport) -> Chart {
    Chart {
        title: "Cross-validated AIC by number of clusters".into(),
        x_label: "number of clusters k".into(),
        y_label: "mean held-out AIC".into(),
        series: vec![Series {
            name: "mean test AIC".into(),
            points: report
                .aggregates
                .iter()
                .filter_map(|a| Some((a.k as f64, a.mean_test_aic?)))
                .collect(),
        }],
    }
}

fn distance_series(series: &DistanceSeries, metric: &str, name: &str) -> Series {
    Series {
        name: name.into(),
        points: series
            .metric(metric)
            .expect("known metric")
            .into_iter()
            .map(|(y, v)| (y as f64, v))
            .collect(),
    }
}

/// Separation of cluster means and of party means over time.
pub fn separation_chart(series: &DistanceSeries) -> Chart {
    Chart {
        title: "Distance between cluster means and between party means".into(),
        x_label: "year".into(),
        y_label: "Euclidean distance".into(),
        series: vec![
            distance_series(series, DistanceRow::METRICS[0], "cluster means"),
            distance_series(series, DistanceRow::METRICS[1], "party means"),
        ],
    }
}

/// Distance of each cluster and party mean from the scale center.
pub fn center_chart(series: &DistanceSeries) -> Chart {
    Chart {
        title: "Distance from the center of the opinion space".into(),
        x_label: "year".into(),
        y_label: "Euclidean distance to center".into(),
        series: vec![
            distance_series(series, DistanceRow::METRICS[2], "cluster 1"),
            distance_series(series, DistanceRow::METRICS[3], "cluster 2"),
            distance_series(series, DistanceRow::METRICS[4], "Democrat mean"),
            distance_series(series, DistanceRow::METRICS[5], "Republican mean"),
        ],
    }
}
