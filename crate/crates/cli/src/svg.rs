//! Small dependency-free line/marker plots. Output is deterministic unless a
//! timestamp comment is requested.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric error bars, one per point.
    pub errors: Option<Vec<f64>>,
    pub style: Style,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, errors: None, style: Style::Line }
    }

    pub fn markers(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, errors: None, style: Style::Markers }
    }

    pub fn with_errors(mut self, errors: Vec<f64>) -> Self {
        self.errors = Some(errors);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y-range; points outside are clipped.
    pub y_range: Option<(f64, f64)>,
    pub timestamp: Option<String>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(x: f64) -> String {
    let s = format!("{:.4}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Default::default() }
    }

    pub fn series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let finite = self.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in finite {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return ((0.0, 1.0), self.y_range.unwrap_or((0.0, 1.0)));
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        let y = match self.y_range {
            Some(r) => r,
            None => {
                if y1 <= y0 {
                    (y0 - 0.5, y1 + 0.5)
                } else {
                    let pad = 0.05 * (y1 - y0);
                    (y0 - pad, y1 + pad)
                }
            }
        };
        ((x0, x1), y)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;
        let inside = |y: f64| y.is_finite() && y >= y0 && y <= y1;

        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
        if let Some(ts) = &self.timestamp {
            let _ = writeln!(out, "<!-- generated {} -->", escape(ts));
        }
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, TOP, TOP + ph);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t));
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            match s.style {
                Style::Line => {
                    // Break the polyline at non-finite or clipped points.
                    let mut run: Vec<String> = Vec::new();
                    let flush = |run: &mut Vec<String>, out: &mut String| {
                        if run.len() > 1 {
                            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, run.join(" "));
                        }
                        run.clear();
                    };
                    for &(x, y) in &s.points {
                        if x.is_finite() && inside(y) {
                            run.push(format!("{:.2},{:.2}", sx(x), sy(y)));
                        } else {
                            flush(&mut run, &mut out);
                        }
                    }
                    flush(&mut run, &mut out);
                }
                Style::Markers => {
                    for (j, &(x, y)) in s.points.iter().enumerate() {
                        if !(x.is_finite() && inside(y)) {
                            continue;
                        }
                        if let Some(e) = s.errors.as_ref().and_then(|e| e.get(j)).filter(|e| e.is_finite()) {
                            let _ = writeln!(
                                out,
                                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                                sx(x),
                                sy(y - e),
                                sy(y + e)
                            );
                        }
                        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
            }
            let ly = TOP + 14.0 + 20.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            match s.style {
                Style::Line => {
                    let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
                }
                Style::Markers => {
                    let _ = writeln!(out, r#"<circle cx="{}" cy="{ly}" r="3" fill="{color}"/>"#, lx + 10.0);
                }
            }
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_without_timestamp() {
        let p = Plot::new("t", "x", "y").series(Series::line("a", vec![(0.0, 1.0), (1.0, 2.0)]));
        assert_eq!(p.render(), p.render());
        assert!(!p.render().contains("<!--"));
        let stamped = Plot { timestamp: Some("now".into()), ..p };
        assert!(stamped.render().contains("<!-- generated now -->"));
    }

    #[test]
    fn gaps_split_polylines() {
        let p = Plot::new("t", "x", "y")
            .series(Series::line("a", vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN), (3.0, 1.0), (4.0, 0.5)]));
        assert_eq!(p.render().matches("<polyline").count(), 2);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(ticks(0.0, 360.0), vec![0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0]);
        assert_eq!(label(0.30000000000000004), "0.3");
        assert_eq!(label(-0.0), "0");
    }
}
