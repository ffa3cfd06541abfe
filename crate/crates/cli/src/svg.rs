//! A small line and scatter plotter. Output depends only on the data, so
//! identical runs give identical files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Debug)]
enum Mark {
    Line,
    Dots(f64),
}

#[derive(Clone, Debug)]
struct Series {
    label: String,
    color: &'static str,
    mark: Mark,
    points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    equal_aspect: bool,
    series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str) -> Self {
        Plot {
            title: title.to_string(),
            ..Default::default()
        }
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.to_string();
        self.y_label = y.to_string();
        self
    }

    /// Same data units per pixel on both axes.
    pub fn equal_aspect(mut self) -> Self {
        self.equal_aspect = true;
        self
    }

    pub fn line(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.push(label, Mark::Line, points)
    }

    pub fn dots(&mut self, label: &str, points: Vec<(f64, f64)>, radius: f64) -> &mut Self {
        self.push(label, Mark::Dots(radius), points)
    }

    fn push(&mut self, label: &str, mark: Mark, points: Vec<(f64, f64)>) -> &mut Self {
        let color = PALETTE[self.series.len() % PALETTE.len()];
        self.series.push(Series {
            label: label.to_string(),
            color,
            mark,
            points,
        });
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let finite = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite())
        };
        let span = |vals: Vec<f64>| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let mut xs = span(finite().map(|p| p.0).collect());
        let mut ys = span(finite().map(|p| p.1).collect());
        if self.equal_aspect {
            let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
            let per_px = ((xs.1 - xs.0) / pw).max((ys.1 - ys.0) / ph);
            let grow = |(lo, hi): (f64, f64), px: f64| {
                let mid = 0.5 * (lo + hi);
                (mid - 0.5 * per_px * px, mid + 0.5 * per_px * px)
            };
            xs = grow(xs, pw);
            ys = grow(ys, ph);
        }
        (xs, ys)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        for t in ticks(x0, x1) {
            let px = sx(t.0);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                t.1
            );
        }
        for t in ticks(y0, y1) {
            let py = sy(t.0);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                t.1
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for series in &self.series {
            match series.mark {
                Mark::Line => {
                    for run in series.points.split(|(x, y)| !(x.is_finite() && y.is_finite())) {
                        if run.len() < 2 {
                            continue;
                        }
                        let pts: Vec<String> =
                            run.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                        let _ = writeln!(
                            s,
                            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                            series.color,
                            pts.join(" ")
                        );
                    }
                }
                Mark::Dots(r) => {
                    let _ = writeln!(s, r#"<g fill="{}" fill-opacity="0.6">"#, series.color);
                    for &(x, y) in series.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{r}"/>"#, sx(x), sy(y));
                    }
                    let _ = writeln!(s, "</g>");
                }
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = WIDTH - RIGHT - 150.0;
            match series.mark {
                Mark::Line => {
                    let _ = write!(
                        s,
                        r#"<line x1="{x}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
                        y - 4.0,
                        x + 18.0,
                        y - 4.0,
                        series.color
                    );
                }
                Mark::Dots(_) => {
                    let _ = write!(
                        s,
                        r#"<circle cx="{}" cy="{:.2}" r="4" fill="{}"/>"#,
                        x + 9.0,
                        y - 4.0,
                        series.color
                    );
                }
            }
            let _ = writeln!(s, r#"<text x="{}" y="{y:.2}">{}</text>"#, x + 24.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions at a 1-2-5 step, with labels.
fn ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut out = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi {
        let v = k * step;
        let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
        out.push((v, format!("{v:.decimals$}")));
        k += 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_use_round_steps() {
        let t: Vec<String> = ticks(-0.3, 1.1).into_iter().map(|t| t.1).collect();
        assert_eq!(t, ["0.0", "0.5", "1.0"]);
        let t: Vec<String> = ticks(-0.3, 0.9).into_iter().map(|t| t.1).collect();
        assert_eq!(t, ["-0.2", "0.0", "0.2", "0.4", "0.6", "0.8"]);
        let t: Vec<String> = ticks(0.0, 3000.0).into_iter().map(|t| t.1).collect();
        assert_eq!(t, ["0", "500", "1000", "1500", "2000", "2500", "3000"]);
    }

    #[test]
    fn rendering_is_deterministic_and_skips_gaps() {
        let mut p = Plot::new("a < b").labels("x", "y");
        p.line("curve", vec![(0.0, 0.0), (1.0, 1.0), (2.0, f64::NAN), (3.0, 2.0)]);
        p.dots("pts", vec![(0.5, 0.5)], 2.0);
        let a = p.render();
        assert_eq!(a, p.render());
        assert!(a.contains("a &lt; b"));
        assert_eq!(a.matches("<polyline").count(), 1);
        assert_eq!(a.matches("<circle").count(), 2);
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn empty_plot_renders() {
        assert!(Plot::new("empty").render().ends_with("</svg>\n"));
    }
}
