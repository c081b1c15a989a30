//! Minimal SVG line plots.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Log-log plot of positive data; `reference` adds dashed power laws t^p through
/// the first point of the first series.
pub fn loglog_svg(title: &str, series: &[Series], reference: &[f64]) -> String {
    let logs: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.log10(), p.1.log10())).collect())
        .collect();
    let all = logs.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-size="13">{}</text>"#, escape(title));
    if !x0.is_finite() {
        s.push_str("</svg>\n");
        return s;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">1e{d}</text>"#, px(d as f64) - 8.0, H - PAD + 14.0);
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let _ = writeln!(s, r#"<text x="4" y="{:.1}" font-size="10">1e{d}</text>"#, py(d as f64) + 3.0);
    }
    for (i, (pts, ser)) in logs.iter().zip(series).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{c}">{}</text>"#,
            W - PAD - 150.0,
            PAD + 14.0 * (i + 1) as f64,
            escape(ser.label)
        );
    }
    if let Some(&(ax, ay)) = logs.first().and_then(|p| p.first()) {
        for &p in reference {
            let ey = (ay + p * (x1 - ax)).clamp(y0, y1);
            let ex = if p != 0.0 { ax + (ey - ay) / p } else { x1 };
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
                px(ax),
                py(ay),
                px(ex),
                py(ey)
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">t^{p}</text>"#, px(ex) + 2.0, py(ey) - 2.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
