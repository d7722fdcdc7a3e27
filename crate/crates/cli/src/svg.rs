//! Minimal SVG output: overlaid curve snapshots and line charts.

use std::fmt::Write;

use curveflow::{CurveState, Vec2};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn num(x: f64) -> String {
    format!("{x:.3}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Blue for the first snapshot through red for the last.
pub fn ramp(i: usize, count: usize) -> String {
    let t = if count > 1 {
        i as f64 / (count - 1) as f64
    } else {
        1.0
    };
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (220.0 - 190.0 * t).round() as u8;
    format!("#{r:02x}30{b:02x}")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Overlays curve snapshots with equal axis scales. Open curves get the
/// substrate as a baseline segment.
pub fn evolution(title: &str, curves: &[CurveState]) -> String {
    let open = curves.iter().any(|c| !c.is_closed());
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in curves {
        let (a, b) = c.bounding_box();
        lo = lo.inf(&a);
        hi = hi.sup(&b);
    }
    if open {
        lo.y = lo.y.min(0.0);
    }
    let pad = 0.05 * (hi - lo).max().max(1e-12);
    lo -= Vec2::new(pad, pad);
    hi += Vec2::new(pad, pad);
    let scale =
        ((WIDTH - 2.0 * MARGIN) / (hi.x - lo.x)).min((HEIGHT - 2.0 * MARGIN) / (hi.y - lo.y));
    let ox = (WIDTH - scale * (hi.x - lo.x)) / 2.0;
    let oy = (HEIGHT + scale * (hi.y - lo.y)) / 2.0;
    let map = |p: Vec2| (ox + scale * (p.x - lo.x), oy - scale * (p.y - lo.y));

    let mut out = String::new();
    header(&mut out, title);
    if open {
        let (x0, y0) = map(Vec2::new(lo.x, 0.0));
        let (x1, _) = map(Vec2::new(hi.x, 0.0));
        let _ = writeln!(
            out,
            r#"<line id="substrate" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2"/>"#,
            num(x0),
            num(y0),
            num(x1),
            num(y0)
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let mut points: Vec<String> = c
            .nodes()
            .iter()
            .map(|&p| {
                let (x, y) = map(p);
                format!("{},{}", num(x), num(y))
            })
            .collect();
        if c.is_closed() {
            points.push(points[0].clone());
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            ramp(i, curves.len()),
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One named line of a chart.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart. With `log` set both axes are base-10 logarithmic and
/// nonpositive points are dropped.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log: bool) -> String {
    let tx = |v: f64| if log { v.log10() } else { v };
    let data: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log || (*x > 0.0 && *y > 0.0)))
                .map(|&(x, y)| (tx(x), tx(y)))
                .collect()
        })
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in data.iter().flatten() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 1e-300_f64.max(1e-12 * y0.abs()) {
        let d = 0.5 * y0.abs().max(1.0) * 1e-3;
        y0 -= d;
        y1 += d;
    }
    let left = MARGIN + 24.0;
    let (w, h) = (WIDTH - left - MARGIN, HEIGHT - 2.0 * MARGIN);
    let map = |x: f64, y: f64| {
        (
            left + w * (x - x0) / (x1 - x0),
            MARGIN + h * (1.0 - (y - y0) / (y1 - y0)),
        )
    };

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(left),
        num(w),
        num(h)
    );
    let label = |v: f64| {
        if log {
            format!("1e{}", num(v))
        } else {
            format!("{v:.4e}")
        }
    };
    for (v, anchor, x, y) in [
        (x0, "start", left, HEIGHT - MARGIN + 16.0),
        (x1, "end", left + w, HEIGHT - MARGIN + 16.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            num(x),
            num(y),
            label(v)
        );
    }
    for (v, y) in [(y0, MARGIN + h), (y1, MARGIN + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            num(left - 4.0),
            num(y),
            label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        num(left + w / 2.0),
        num(HEIGHT - 12.0),
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        num(HEIGHT / 2.0),
        num(HEIGHT / 2.0),
        escape(y_label)
    );
    for (i, (s, pts)) in series.iter().zip(&data).enumerate() {
        let colour = ramp(i, series.len());
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map(x, y);
                format!("{},{}", num(px), num(py))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}">{}</text>"#,
            num(left + 8.0),
            num(MARGIN + 16.0 + 14.0 * i as f64),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
