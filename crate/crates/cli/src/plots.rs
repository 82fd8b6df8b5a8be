//! Hand-written SVG charts for the flexibility report.
//!
//! Coordinates are printed with two decimals so output is byte-stable.

use std::fmt::Write as _;

const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#ff7f0e";
const GREY: &str = "#bbbbbb";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    buf: String,
}

impl Svg {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(buf, r#"<rect width="{width:.2}" height="{height:.2}" fill="white"/>"#);
        let _ = writeln!(
            buf,
            r#"<text x="{:.2}" y="18.00" text-anchor="middle" font-size="13">{}</text>"#,
            width / 2.0,
            escape(title)
        );
        Self { buf }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"{extra}/>"#
        );
    }

    fn polyline(&mut self, id: &str, pts: &[(f64, f64)], stroke: &str, extra: &str) {
        let mut p = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if i > 0 {
                p.push(' ');
            }
            let _ = write!(p, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            self.buf,
            r#"<polyline id="{id}" points="{p}" fill="none" stroke="{stroke}" stroke-width="1.5"{extra}/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.buf,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.buf,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

/// Plot area in pixels.
#[derive(Debug, Clone, Copy)]
struct Area {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Area {
    fn x(&self, t: f64) -> f64 {
        self.left + t * self.width
    }

    fn y(&self, t: f64) -> f64 {
        self.top + (1.0 - t) * self.height
    }

    fn bottom(&self) -> f64 {
        self.top + self.height
    }
}

fn axes(svg: &mut Svg, a: Area, y_range: (f64, f64), x_label: &str, y_label: &str) {
    svg.line(a.left, a.bottom(), a.left + a.width, a.bottom(), "black", "");
    svg.line(a.left, a.top, a.left, a.bottom(), "black", "");
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let v = y_range.0 + t * (y_range.1 - y_range.0);
        svg.line(a.left - 4.0, a.y(t), a.left, a.y(t), "black", "");
        svg.text(a.left - 6.0, a.y(t) + 4.0, "end", &format!("{v:.2}"));
    }
    svg.text(a.x(0.5), a.bottom() + 34.0, "middle", x_label);
    let _ = writeln!(
        svg.buf,
        r#"<text x="14.00" y="{:.2}" text-anchor="middle" transform="rotate(-90 14.00 {:.2})">{}</text>"#,
        a.y(0.5),
        a.y(0.5),
        escape(y_label)
    );
}

const LORENZ_AREA: Area = Area {
    left: 60.0,
    top: 40.0,
    width: 300.0,
    height: 300.0,
};

/// Maps a Lorenz point to pixel coordinates in [`lorenz`] output.
pub fn lorenz_px(x: f64, y: f64) -> (f64, f64) {
    (LORENZ_AREA.x(x), LORENZ_AREA.y(y))
}

/// Lorenz curves of energy use and flexibility for one building, with the
/// equality diagonal.
pub fn lorenz(building: &str, eu: &[[f64; 2]], ef: &[[f64; 2]]) -> String {
    let a = LORENZ_AREA;
    let mut svg = Svg::new(480.0, 400.0, &format!("Lorenz curves, building {building}"));
    axes(&mut svg, a, (0.0, 1.0), "cumulative share of zones", "cumulative share");
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        svg.line(a.x(t), a.bottom(), a.x(t), a.bottom() + 4.0, "black", "");
        svg.text(a.x(t), a.bottom() + 16.0, "middle", &format!("{t:.2}"));
    }
    svg.polyline("diagonal", &[lorenz_px(0.0, 0.0), lorenz_px(1.0, 1.0)], GREY, r#" stroke-dasharray="4 3""#);
    let map = |pts: &[[f64; 2]]| pts.iter().map(|p| lorenz_px(p[0], p[1])).collect::<Vec<_>>();
    if !eu.is_empty() {
        svg.polyline("lorenz-eu", &map(eu), BLUE, "");
    }
    if !ef.is_empty() {
        svg.polyline("lorenz-ef", &map(ef), ORANGE, "");
    }
    let lx = a.left + a.width + 12.0;
    svg.line(lx, 60.0, lx + 18.0, 60.0, BLUE, r#" stroke-width="2""#);
    svg.text(lx + 22.0, 64.0, "start", "energy use");
    svg.line(lx, 78.0, lx + 18.0, 78.0, ORANGE, r#" stroke-width="2""#);
    svg.text(lx + 22.0, 82.0, "start", "flexibility");
    svg.finish()
}

/// White-to-blue ramp; `t` in [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c = |lo: f64, hi: f64| (hi + (lo - hi) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(8.0, 247.0), c(48.0, 251.0), c(107.0, 255.0))
}

/// Zones × {EU share, EF share}, each column scaled to its own maximum.
pub fn share_heatmap(building: &str, rows: &[(String, Option<f64>, Option<f64>)]) -> String {
    let cell_w = 90.0;
    let cell_h = 16.0;
    let left = 130.0;
    let top = 56.0;
    let height = top + cell_h * rows.len() as f64 + 20.0;
    let mut svg = Svg::new(left + 2.0 * cell_w + 120.0, height.max(120.0), &format!("Zone shares, building {building}"));
    svg.text(left + cell_w / 2.0, top - 8.0, "middle", "EU share");
    svg.text(left + 1.5 * cell_w, top - 8.0, "middle", "EF share");
    let max = |f: fn(&(String, Option<f64>, Option<f64>)) -> Option<f64>| {
        rows.iter().filter_map(f).fold(0.0_f64, f64::max)
    };
    let max_eu = max(|r| r.1);
    let max_ef = max(|r| r.2);
    for (i, (id, eu, ef)) in rows.iter().enumerate() {
        let y = top + i as f64 * cell_h;
        svg.text(left - 6.0, y + cell_h - 4.0, "end", id);
        for (j, (v, m)) in [(eu, max_eu), (ef, max_ef)].into_iter().enumerate() {
            let x = left + j as f64 * cell_w;
            match v {
                Some(v) => {
                    let fill = ramp(if m > 0.0 { v / m } else { 0.0 });
                    svg.rect(x, y, cell_w - 1.0, cell_h - 1.0, &fill);
                    svg.text(x + cell_w / 2.0, y + cell_h - 4.0, "middle", &format!("{v:.2}"));
                }
                None => svg.rect(x, y, cell_w - 1.0, cell_h - 1.0, GREY),
            }
        }
    }
    svg.finish()
}

/// Vertical bars sorted in the given order; negative values hang below
/// the zero line.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let a = Area {
        left: 70.0,
        top: 40.0,
        width: (bars.len() as f64 * 14.0).max(300.0),
        height: 260.0,
    };
    let lo = bars.iter().map(|b| b.1).fold(0.0_f64, f64::min);
    let mut hi = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max);
    if hi - lo <= 0.0 {
        hi = lo + 1.0;
    }
    let mut svg = Svg::new(a.left + a.width + 30.0, a.bottom() + 60.0, title);
    axes(&mut svg, a, (lo, hi), "zones, sorted", y_label);
    let t = |v: f64| (v - lo) / (hi - lo);
    svg.line(a.left, a.y(t(0.0)), a.left + a.width, a.y(t(0.0)), "black", "");
    let w = a.width / bars.len().max(1) as f64;
    for (i, (_, v)) in bars.iter().enumerate() {
        let (y0, y1) = (a.y(t(0.0)), a.y(t(*v)));
        let fill = if *v >= 0.0 { BLUE } else { ORANGE };
        svg.rect(a.left + i as f64 * w + 1.0, y0.min(y1), (w - 2.0).max(0.5), (y1 - y0).abs(), fill);
    }
    svg.finish()
}

/// Histogram of `values` over `bins` equal-width bins.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize) -> String {
    let a = Area {
        left: 60.0,
        top: 40.0,
        width: 360.0,
        height: 260.0,
    };
    let bins = bins.max(1);
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        lo = 0.0;
        hi = 1.0;
    } else if hi - lo <= 0.0 {
        lo -= 0.5;
        hi += 0.5;
    }
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut svg = Svg::new(460.0, 360.0, title);
    axes(&mut svg, a, (0.0, top), x_label, "zones");
    let w = a.width / bins as f64;
    for (i, c) in counts.iter().enumerate() {
        let h = *c as f64 / top * a.height;
        svg.rect(a.left + i as f64 * w + 1.0, a.bottom() - h, w - 2.0, h, BLUE);
    }
    for i in 0..=bins {
        if i % 2 == 0 || i == bins {
            let v = lo + (hi - lo) * i as f64 / bins as f64;
            svg.text(a.left + i as f64 * w, a.bottom() + 16.0, "middle", &format!("{v:.2}"));
        }
    }
    svg.finish()
}
