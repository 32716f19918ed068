//! Static, self-contained SVG charts: boxplots, index curves over time
//! and trajectory fans.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from data to pixels.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    /// Roughly five round tick values inside the range.
    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 6.0)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = write!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = write!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        Self { out }
    }

    fn y_axis(&mut self, y: &Axis, label: &str) {
        let x0 = LEFT;
        let _ = write!(self.out, r##"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{}" stroke="#000"/>"##, HEIGHT - BOTTOM);
        for t in y.ticks() {
            let py = y.map(t);
            let _ = write!(
                self.out,
                r##"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0,
                WIDTH - RIGHT,
                x0 - 6.0,
                py + 4.0,
                tick_label(t)
            );
        }
        let _ = write!(
            self.out,
            r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(label)
        );
    }

    fn x_axis(&mut self, x: &Axis, label: &str) {
        let y0 = HEIGHT - BOTTOM;
        let _ = write!(self.out, r##"<line x1="{LEFT}" y1="{y0}" x2="{}" y2="{y0}" stroke="#000"/>"##, WIDTH - RIGHT);
        for t in x.ticks() {
            let px = x.map(t);
            let _ = write!(
                self.out,
                r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="#000"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
                y0 + 5.0,
                y0 + 18.0,
                tick_label(t)
            );
        }
        let _ = write!(
            self.out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 24.0,
            escape(label)
        );
    }

    fn legend(&mut self, names: &[&str]) {
        for (k, name) in names.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * k as f64;
            let x = WIDTH - RIGHT + 14.0;
            let _ = write!(
                self.out,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2.5"/><text x="{}" y="{}">{}</text>"#,
                x + 20.0,
                PALETTE[k % PALETTE.len()],
                x + 26.0,
                y + 4.0,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Five-number summary with Tukey whiskers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p| crate::stats::quantile(&v, p);
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo_fence..=hi_fence).contains(x)).collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.into_iter().filter(|x| !(lo_fence..=hi_fence).contains(x)).collect(),
    })
}

/// One box per labelled sample.
pub fn boxplot(title: &str, y_label: &str, samples: &[(String, Vec<f64>)]) -> String {
    let stats: Vec<Option<BoxStats>> = samples.iter().map(|(_, v)| box_stats(v)).collect();
    let all = samples.iter().flat_map(|(_, v)| v.iter().copied()).filter(|x| x.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let pad = 0.05 * (hi - lo).max(1e-9);
    let y = Axis::new((lo - pad).min(0.0), hi + pad, HEIGHT - BOTTOM, TOP);
    let mut c = Canvas::new(title);
    c.y_axis(&y, y_label);
    let y0 = HEIGHT - BOTTOM;
    let _ = write!(c.out, r##"<line x1="{LEFT}" y1="{y0}" x2="{}" y2="{y0}" stroke="#000"/>"##, WIDTH - RIGHT);
    let slot = (WIDTH - RIGHT - LEFT) / samples.len().max(1) as f64;
    for (k, ((name, _), s)) in samples.iter().zip(&stats).enumerate() {
        let cx = LEFT + slot * (k as f64 + 0.5);
        let half = (slot * 0.3).min(22.0);
        let _ = write!(
            c.out,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            escape(name)
        );
        let Some(s) = s else { continue };
        let color = PALETTE[k % PALETTE.len()];
        let _ = write!(
            c.out,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000"/><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000"/>"##,
            y.map(s.whisker_low),
            y.map(s.q1),
            y.map(s.q3),
            y.map(s.whisker_high)
        );
        for w in [s.whisker_low, s.whisker_high] {
            let _ = write!(
                c.out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#000"/>"##,
                cx - half / 2.0,
                cx + half / 2.0,
                py = y.map(w)
            );
        }
        let _ = write!(
            c.out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="{color}"/><line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#000" stroke-width="2"/>"##,
            cx - half,
            y.map(s.q3),
            2.0 * half,
            (y.map(s.q1) - y.map(s.q3)).max(0.5),
            cx - half,
            cx + half,
            py = y.map(s.median)
        );
        for o in &s.outliers {
            let _ = write!(c.out, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="{color}"/>"#, y.map(*o));
        }
    }
    c.finish()
}

/// Curves over a shared x grid; `None` values break the line.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x: &[f64], series: &[(String, Vec<Option<f64>>)]) -> String {
    let ys = series.iter().flat_map(|(_, v)| v.iter().flatten().copied()).filter(|v| v.is_finite());
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo > hi { (0.0, 1.0) } else { (lo.min(0.0), hi) };
    let x_first = x.first().copied().unwrap_or(0.0);
    let x_last = x.last().copied().unwrap_or(1.0);
    let xa = Axis::new(x_first, x_last, LEFT, WIDTH - RIGHT);
    let ya = Axis::new(lo, hi + 0.05 * (hi - lo).max(1e-9), HEIGHT - BOTTOM, TOP);
    let mut c = Canvas::new(title);
    c.y_axis(&ya, y_label);
    c.x_axis(&xa, x_label);
    for (k, (_, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = write!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for (&xv, v) in x.iter().zip(values) {
            match v.filter(|v| v.is_finite()) {
                Some(v) => segment.push(format!("{:.2},{:.2}", xa.map(xv), ya.map(v))),
                None => flush(&mut segment, &mut c.out),
            }
        }
        flush(&mut segment, &mut c.out);
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    c.legend(&names);
    c.finish()
}

/// Step paths drawn translucently on top of each other, with the
/// pointwise median over `grid` in bold.
pub fn trajectory_fan(title: &str, y_label: &str, paths: &[(Vec<f64>, Vec<f64>)], grid: &[f64]) -> String {
    let t_end = grid.last().copied().unwrap_or_else(|| {
        paths.iter().filter_map(|(t, _)| t.last().copied()).fold(0.0, f64::max)
    });
    let hi = paths.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max);
    let xa = Axis::new(0.0, t_end.max(1e-9), LEFT, WIDTH - RIGHT);
    let ya = Axis::new(0.0, hi * 1.05 + 1e-9, HEIGHT - BOTTOM, TOP);
    let mut c = Canvas::new(title);
    c.y_axis(&ya, y_label);
    c.x_axis(&xa, "time");
    for (times, values) in paths {
        let mut pts = String::new();
        let mut prev: Option<f64> = None;
        for (&t, &v) in times.iter().zip(values) {
            if t > t_end {
                break;
            }
            if let Some(p) = prev {
                let _ = write!(pts, "{:.2},{:.2} ", xa.map(t), ya.map(p));
            }
            let _ = write!(pts, "{:.2},{:.2} ", xa.map(t), ya.map(v));
            prev = Some(v);
        }
        if let Some(p) = prev {
            let _ = write!(pts, "{:.2},{:.2}", xa.map(t_end), ya.map(p));
        }
        let _ = write!(c.out, r#"<polyline fill="none" stroke="{}" stroke-opacity="0.25" points="{}"/>"#, PALETTE[0], pts.trim_end());
    }
    if !paths.is_empty() && !grid.is_empty() {
        let value_at = |(times, values): &(Vec<f64>, Vec<f64>), t: f64| {
            let k = times.partition_point(|&s| s <= t);
            values[k.saturating_sub(1)]
        };
        let pts: Vec<String> = grid
            .iter()
            .map(|&t| {
                let at: Vec<f64> = paths.iter().map(|p| value_at(p, t)).collect();
                format!("{:.2},{:.2}", xa.map(t), ya.map(crate::stats::median(&at)))
            })
            .collect();
        let _ = write!(c.out, r#"<polyline fill="none" stroke="{}" stroke-width="2.5" points="{}"/>"#, PALETTE[1], pts.join(" "));
        c.legend(&["paths", "median"]);
    }
    c.finish()
}
