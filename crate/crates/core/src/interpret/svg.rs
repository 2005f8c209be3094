//! Minimal static SVG charts for impact curves.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        (lo - 0.5, lo + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

pub(crate) fn line_chart(title: &str, x: &[f64], y: &[f64]) -> String {
    let (x0, x1) = range(x);
    let (y0, y1) = range(y);
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title);
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if y0 < 0.0 && y1 > 0.0 {
        let z = py(0.0);
        let _ = writeln!(
            s,
            "<line x1=\"{PAD}\" y1=\"{z:.2}\" x2=\"{}\" y2=\"{z:.2}\" stroke=\"#ccc\"/>",
            W - PAD
        );
    }
    let points: Vec<String> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.join(" ")
    );
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">x: [{x0:.3}, {x1:.3}]  logit: [{y0:.3}, {y1:.3}]</text>",
        H - 12.0
    );
    s.push_str("</svg>\n");
    s
}

/// Diverging blue-white-red color for `v` scaled by `m = max |v|`.
fn color(v: f64, m: f64) -> String {
    let t = if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 - (255.0 - c) * t.abs()).round() as u8;
    if t >= 0.0 {
        format!("#{:02x}{:02x}{:02x}", 214, fade(39.0), fade(40.0))
    } else {
        format!("#{:02x}{:02x}{:02x}", fade(31.0), fade(119.0), 180)
    }
}

pub(crate) fn heatmap(title: &str, x: &[f64], x2: &[f64], z: &[f64]) -> String {
    let m = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cw = (W - 2.0 * PAD) / x.len() as f64;
    let ch = (H - 2.0 * PAD) / x2.len() as f64;
    let mut s = header(title);
    for a in 0..x.len() {
        for b in 0..x2.len() {
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                PAD + a as f64 * cw,
                H - PAD - (b + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                color(z[a * x2.len() + b], m)
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">|logit| max {m:.3}</text>",
        H - 12.0
    );
    s.push_str("</svg>\n");
    s
}
