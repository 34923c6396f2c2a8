//! Minimal static line plots: a grid of panels with linear auto-ranged axes
//! on a fixed 800x600 canvas. Output depends only on the input data.

use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Fixed colour for the `i`-th series of a family.
pub fn palette(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub color: String,
    pub stroke: Stroke,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(color: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            color: color.to_string(),
            stroke: Stroke::Solid,
            points,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.stroke = Stroke::Dashed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Circle,
    Triangle,
}

#[derive(Debug, Clone)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
    /// Same data-to-pixel scale on both axes.
    pub equal_aspect: bool,
}

impl Panel {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        Self {
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub columns: usize,
    pub panels: Vec<Panel>,
    /// `(colour, stroke, label)` entries shown once above the panels.
    pub legend: Vec<(String, Stroke, String)>,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if !(lo <= hi) {
            return Self { lo: -1.0, hi: 1.0 };
        }
        let span = hi - lo;
        if span <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            return Self {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        Self {
            lo: lo - 0.05 * span,
            hi: hi + 0.05 * span,
        }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    fn widen_to(&mut self, span: f64) {
        let mid = 0.5 * (self.lo + self.hi);
        self.lo = mid - 0.5 * span;
        self.hi = mid + 0.5 * span;
    }
}

/// Tick positions on a 1-2-5 grid, and the decimals needed to print them.
fn ticks(range: Range, target: usize) -> (Vec<f64>, usize) {
    let raw = range.span() / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (range.lo / step).ceil() as i64;
    let last = (range.hi / step).floor() as i64;
    let values = (first..=last).map(|k| k as f64 * step).collect();
    (values, decimals)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn dash_attr(stroke: Stroke) -> &'static str {
    match stroke {
        Stroke::Solid => "",
        Stroke::Dashed => " stroke-dasharray=\"6 4\"",
    }
}

impl Figure {
    pub fn render(&self) -> String {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(
            svg,
            "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"22\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            escape(&self.title)
        );
        self.render_legend(&mut svg);

        let columns = self.columns.max(1);
        let rows = self.panels.len().div_ceil(columns).max(1);
        let top = if self.legend.is_empty() { 34.0 } else { 56.0 };
        let cell_w = WIDTH / columns as f64;
        let cell_h = (HEIGHT - top) / rows as f64;
        for (i, panel) in self.panels.iter().enumerate() {
            let cell = Rect {
                x: (i % columns) as f64 * cell_w,
                y: top + (i / columns) as f64 * cell_h,
                w: cell_w,
                h: cell_h,
            };
            render_panel(&mut svg, panel, cell);
        }
        svg.push_str("</svg>\n");
        svg
    }

    fn render_legend(&self, svg: &mut String) {
        if self.legend.is_empty() {
            return;
        }
        let slot = (WIDTH - 40.0) / self.legend.len() as f64;
        for (i, (color, stroke, label)) in self.legend.iter().enumerate() {
            let x = 20.0 + i as f64 * slot;
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"40\" x2=\"{:.2}\" y2=\"40\" stroke=\"{color}\" stroke-width=\"2\"{}/>",
                x + 22.0,
                dash_attr(*stroke)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"44\" font-size=\"12\">{}</text>",
                x + 27.0,
                escape(label)
            );
        }
    }
}

fn render_panel(svg: &mut String, panel: &Panel, cell: Rect) {
    let plot = Rect {
        x: cell.x + 62.0,
        y: cell.y + 8.0,
        w: cell.w - 78.0,
        h: cell.h - 48.0,
    };
    let xs = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .chain(panel.markers.iter().map(|m| m.x));
    let ys = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(panel.markers.iter().map(|m| m.y));
    let mut xr = Range::of(xs);
    let mut yr = Range::of(ys);
    if panel.equal_aspect {
        let scale = (plot.w / xr.span()).min(plot.h / yr.span());
        xr.widen_to(plot.w / scale);
        yr.widen_to(plot.h / scale);
    }
    let px = |x: f64| plot.x + (x - xr.lo) / xr.span() * plot.w;
    let py = |y: f64| plot.y + plot.h - (y - yr.lo) / yr.span() * plot.h;

    let _ = writeln!(
        svg,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        plot.x, plot.y, plot.w, plot.h
    );
    let (xt, xd) = ticks(xr, 6);
    for v in xt {
        let x = px(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            plot.y,
            plot.y + plot.h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{v:.xd$}</text>",
            plot.y + plot.h + 13.0
        );
    }
    let (yt, yd) = ticks(yr, 5);
    for v in yt {
        let y = py(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            plot.x,
            plot.x + plot.w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{v:.yd$}</text>",
            plot.x - 4.0,
            y + 3.5
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        plot.x + plot.w / 2.0,
        plot.y + plot.h + 30.0,
        escape(&panel.x_label)
    );
    let (lx, ly) = (cell.x + 14.0, plot.y + plot.h / 2.0);
    let _ = writeln!(
        svg,
        "<text x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
        escape(&panel.y_label)
    );

    for series in &panel.series {
        // Non-finite samples break the line.
        for run in series
            .points
            .split(|p| !(p.0.is_finite() && p.1.is_finite()))
        {
            if run.len() < 2 {
                continue;
            }
            let coords: Vec<String> = run
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{}/>",
                coords.join(" "),
                series.color,
                dash_attr(series.stroke)
            );
        }
    }
    for m in &panel.markers {
        let (x, y) = (px(m.x), py(m.y));
        match m.shape {
            Shape::Circle => {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"black\"/>"
                );
            }
            Shape::Triangle => {
                let _ = writeln!(
                    svg,
                    "<polygon points=\"{x:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"black\"/>",
                    y - 6.0,
                    x - 5.5,
                    y + 4.0,
                    x + 5.5,
                    y + 4.0
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure() -> Figure {
        let mut panel = Panel::new("t", "y");
        panel.series.push(Series::new(
            palette(0),
            (0..50)
                .map(|k| (k as f64, (k as f64 * 0.1).sin()))
                .collect(),
        ));
        panel.series.push(
            Series::new(
                palette(1),
                vec![(0.0, 1.0), (f64::NAN, 0.0), (1.0, 2.0), (2.0, 2.5)],
            )
            .dashed(),
        );
        panel.markers.push(Marker {
            x: 0.0,
            y: 0.0,
            shape: Shape::Triangle,
        });
        Figure {
            title: "a < b & c".into(),
            columns: 2,
            panels: vec![
                panel.clone(),
                Panel {
                    equal_aspect: true,
                    ..panel
                },
            ],
            legend: vec![(palette(0).into(), Stroke::Solid, "one".into())],
        }
    }

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let a = figure().render();
        assert_eq!(a, figure().render());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("viewBox=\"0 0 800 600\""));
        assert!(a.contains("a &lt; b &amp; c"));
        // First series, plus the second split around its NaN (one run is too short to draw).
        assert_eq!(a.matches("<polyline").count(), 4);
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn tick_grid() {
        let (t, d) = ticks(
            Range {
                lo: -0.03,
                hi: 0.93,
            },
            5,
        );
        assert_eq!(d, 1);
        assert_eq!(t.len(), 5);
        assert!((t[0] - 0.0).abs() < 1e-15 && (t[4] - 0.8).abs() < 1e-12);
        let (t, d) = ticks(Range { lo: 0.0, hi: 9.42 }, 6);
        assert_eq!((t.len(), d), (5, 0));
    }

    #[test]
    fn degenerate_ranges_are_widened() {
        let r = Range::of([2.0, 2.0].into_iter());
        assert!(r.lo < 2.0 && r.hi > 2.0);
        let r = Range::of([f64::NAN].into_iter());
        assert_eq!((r.lo, r.hi), (-1.0, 1.0));
    }
}
