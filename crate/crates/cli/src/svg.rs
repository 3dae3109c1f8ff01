//! Minimal static SVG charts. Coordinates are printed with two decimals so
//! identical data gives identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data range padded by 5%, widened when degenerate.
fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - d, hi + d);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick_decimals(span: f64) -> usize {
    (-(span / 4.0).log10().floor()).clamp(0.0, 6.0) as usize
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    out: String,
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut f = Frame { x, y, out: String::new() };
        let _ = write!(
            f.out,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">
<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>
<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>
"##,
            WIDTH / 2.0,
            escape(title)
        );
        f.axes(xlabel, ylabel);
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn axes(&mut self, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
        let _ = writeln!(
            self.out,
            r##"<path d="M{x0:.2} {y1:.2} V{y0:.2} H{x1:.2}" fill="none" stroke="#000000"/>"##
        );
        let (dx, dy) = (tick_decimals(self.x.1 - self.x.0), tick_decimals(self.y.1 - self.y.0));
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                self.out,
                r##"<line x1="{xp:.2}" y1="{y0:.2}" x2="{xp:.2}" y2="{:.2}" stroke="#000000"/><text x="{xp:.2}" y="{:.2}" text-anchor="middle">{xv:.dx$}</text>"##,
                y0 + 4.0,
                y0 + 16.0
            );
            let _ = writeln!(
                self.out,
                r##"<line x1="{:.2}" y1="{yp:.2}" x2="{x0:.2}" y2="{yp:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.dy$}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                yp + 4.0
            );
        }
        let _ = writeln!(
            self.out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0,
            escape(xlabel)
        );
        let _ = writeln!(
            self.out,
            r##"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"##,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, dash: bool) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let dash = if dash { r#" stroke-dasharray="5,4""# } else { "" };
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn dot(&mut self, x: f64, y: f64, r: f64, color: &str) {
        let _ = writeln!(
            self.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"/>"#,
            self.px(x),
            self.py(y)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Scatter with an optional fitted line `y = a + b x` and a corner note.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>, note: &str) -> String {
    let x = padded(points.iter().map(|p| p.0));
    let y = padded(points.iter().map(|p| p.1));
    let mut f = Frame::new(title, xlabel, ylabel, x, y);
    for &(a, b) in points {
        f.dot(a, b, 2.5, PALETTE[0]);
    }
    if let Some((a, b)) = fit {
        f.polyline(&[(x.0, a + b * x.0), (x.1, a + b * x.1)], PALETTE[1], false);
    }
    f.text(WIDTH - MARGIN_RIGHT - 6.0, MARGIN_TOP + 14.0, "end", note);
    f.finish()
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// One line per series with a legend.
pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let x = padded(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = padded(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut f = Frame::new(title, xlabel, ylabel, x, y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        f.polyline(&s.points, color, false);
        let ly = MARGIN_TOP + 12.0 + 14.0 * i as f64;
        let _ = writeln!(
            f.out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="3" fill="{color}"/>"#,
            MARGIN_LEFT + 10.0,
            ly - 4.0
        );
        f.text(MARGIN_LEFT + 24.0, ly, "start", &s.name);
    }
    f.finish()
}

/// Interval triangle: black for positive slopes, gray for negative, with
/// the zero frontier drawn on top.
pub fn sign_map(title: &str, points: &[(u32, u32, f64)], frontier: &[(f64, f64)]) -> String {
    let mut f = Frame::new(title, "p (lower percentile)", "q (upper percentile)", (0.0, 100.0), (0.0, 100.0));
    let step = points
        .iter()
        .map(|p| p.1 - p.0)
        .min()
        .unwrap_or(1)
        .max(1) as f64;
    let r = (1.6 * step.sqrt()).min(4.0);
    for &(p, q, beta) in points {
        let color = if beta > 0.0 {
            "#000000"
        } else if beta < 0.0 {
            "#aaaaaa"
        } else {
            "#ff0000"
        };
        f.dot(p as f64, q as f64, r, color);
    }
    f.polyline(frontier, PALETTE[1], false);
    f.finish()
}

/// Vertical bars centred on `x`.
pub fn bars(title: &str, xlabel: &str, ylabel: &str, data: &[(f64, f64)], width: f64) -> String {
    let x = padded(data.iter().flat_map(|d| [d.0 - width, d.0 + width]));
    let top = data.iter().map(|d| d.1).fold(0.0, f64::max);
    let mut f = Frame::new(title, xlabel, ylabel, x, (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }));
    for &(cx, h) in data {
        let (x0, x1) = (f.px(cx - width / 2.0), f.px(cx + width / 2.0));
        let (y0, y1) = (f.py(0.0), f.py(h));
        let _ = writeln!(
            f.out,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x1 - x0,
            y0 - y1,
            PALETTE[0]
        );
    }
    f.finish()
}

pub struct Whisker {
    pub label: String,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

/// Dot-and-whisker plot over categories, with a zero line and an optional
/// dashed separator after item `separator_after`.
pub fn whiskers(title: &str, ylabel: &str, items: &[Whisker], separator_after: Option<usize>, label_every: usize) -> String {
    let n = items.len().max(1) as f64;
    let y = padded(items.iter().flat_map(|w| [w.low, w.high, 0.0]));
    let mut f = Frame::new(title, "", ylabel, (0.0, n + 1.0), y);
    f.polyline(&[(0.0, 0.0), (n + 1.0, 0.0)], "#777777", true);
    for (i, w) in items.iter().enumerate() {
        let x = i as f64 + 1.0;
        if w.estimate.is_finite() {
            let color = if w.low > 0.0 || w.high < 0.0 { PALETTE[1] } else { PALETTE[0] };
            f.polyline(&[(x, w.low), (x, w.high)], color, false);
            f.dot(x, w.estimate, 3.0, color);
        }
        if label_every > 0 && (i % label_every == 0 || items.len() <= 12) {
            let (xp, yp) = (f.px(x), HEIGHT - MARGIN_BOTTOM + 30.0);
            f.text(xp, yp, "middle", &w.label);
        }
    }
    if let Some(k) = separator_after {
        let x = k as f64 + 1.5;
        f.polyline(&[(x, y.0), (x, y.1)], "#000000", true);
    }
    f.finish()
}
