//! Minimal SVG charts: line plots with bands and bar charts with error bars.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Half-width of a shaded band around each point.
    pub spread: Option<Vec<f64>>,
}

pub struct Bar {
    pub label: String,
    pub value: f64,
    pub error: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Roughly five round tick values spanning `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if v.abs() >= 1000.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0).max(1e-12) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0).max(1e-12) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text transform=\"translate(18 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + W - RIGHT) / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 18.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel),
    );
}

fn y_axis(out: &mut String, f: &Frame) {
    for t in ticks(f.y0, f.y1) {
        let y = f.py(t);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = W - RIGHT + 14.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"14\" height=\"4\" fill=\"{}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y - 2.0,
            PALETTE[i % PALETTE.len()],
            x + 20.0,
            y + 4.0,
            escape(l)
        );
    }
}

/// Line chart, one polyline per series, with an optional shaded band.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x0, x1) = if x0.is_finite() {
        (x0.min(0.0), x1.max(x0 + 1.0))
    } else {
        (0.0, 1.0)
    };
    let mut y1: f64 = 0.0;
    for s in series {
        for (i, p) in s.points.iter().enumerate() {
            let band = s.spread.as_ref().map_or(0.0, |b| b[i]);
            y1 = y1.max(p.1 + band);
        }
    }
    let y1 = if y1 <= 1.0 { 1.0 } else { y1 * 1.05 };
    let f = Frame { x0, x1, y0: 0.0, y1 };

    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    y_axis(&mut out, &f);
    for t in ticks(x0, x1) {
        let x = f.px(t);
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            H - BOTTOM + 18.0,
            label(t)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        if let Some(band) = &s.spread {
            let upper = s.points.iter().zip(band).map(|(p, b)| (p.0, (p.1 + b).min(f.y1)));
            let lower = s.points.iter().zip(band).rev().map(|(p, b)| (p.0, (p.1 - b).max(0.0)));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
                .collect();
            let _ = writeln!(
                out,
                "<polygon points=\"{}\" fill=\"{colour}\" fill-opacity=\"0.15\"/>",
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Vertical bars with symmetric error whiskers.
pub fn bar_chart(title: &str, ylabel: &str, bars: &[Bar]) -> String {
    let top = bars.iter().map(|b| b.value + b.error).fold(0.0, f64::max);
    let f = Frame {
        x0: 0.0,
        x1: bars.len().max(1) as f64,
        y0: 0.0,
        y1: if top > 0.0 { top * 1.1 } else { 1.0 },
    };
    let mut out = String::new();
    header(&mut out, title, "", ylabel);
    y_axis(&mut out, &f);
    let slot = f.px(1.0) - f.px(0.0);
    for (i, b) in bars.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let cx = f.px(i as f64 + 0.5);
        let (y, base) = (f.py(b.value), f.py(0.0));
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{colour}\"/>\
             <text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            cx - slot * 0.3,
            slot * 0.6,
            (base - y).max(0.0),
            H - BOTTOM + 18.0,
            escape(&b.label),
            (y - 6.0).max(TOP + 12.0),
            label(b.value)
        );
        if b.error > 0.0 {
            let (lo, hi) = (f.py((b.value - b.error).max(0.0)), f.py(b.value + b.error));
            let _ = writeln!(
                out,
                "<line x1=\"{cx:.1}\" y1=\"{lo:.1}\" x2=\"{cx:.1}\" y2=\"{hi:.1}\" stroke=\"black\"/>"
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_cover_the_range() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let t = ticks(0.0, 3000.0);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&3000.0));
    }

    #[test]
    fn one_polyline_per_series() {
        let s = |l: &str| Series {
            label: l.into(),
            points: vec![(0.0, 0.1), (100.0, 0.5)],
            spread: Some(vec![0.05, 0.1]),
        };
        let svg = line_chart("t", "x", "y", &[s("a"), s("b<c")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn bars_with_whiskers() {
        let bars = [
            Bar {
                label: "x".into(),
                value: 3.0,
                error: 1.0,
            },
            Bar {
                label: "y".into(),
                value: 0.0,
                error: 0.0,
            },
        ];
        let svg = bar_chart("c", "n", &bars);
        assert_eq!(svg.matches("fill=\"#").count(), 2);
        assert_eq!(svg.matches("stroke=\"black\"/>").count(), 2);
    }
}
