//! Minimal SVG hydrographs: observed and predicted flow against date.

use std::fmt::Write;

use chrono::NaiveDate;

const W: f64 = 800.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn polyline(values: &[f64], lo: f64, hi: f64, colour: &str) -> String {
    let n = values.len().max(2) - 1;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let x = PAD + (W - 2.0 * PAD) * t as f64 / n as f64;
            let y = H - PAD - (H - 2.0 * PAD) * (v - lo) / span;
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
        pts.join(" ")
    )
}

pub fn hydrograph(title: &str, dates: &[NaiveDate], observed: &[f64], predicted: &[f64]) -> String {
    let all = observed.iter().chain(predicted).copied().filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi) } else { (0.0, 1.0) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
        x = W - PAD,
        y = H - PAD
    );
    let _ = writeln!(s, r#"<text x="4" y="{}">{hi:.3}</text>"#, PAD + 4.0);
    let _ = writeln!(s, r#"<text x="4" y="{}">{lo:.3}</text>"#, H - PAD);
    if let (Some(a), Some(b)) = (dates.first(), dates.last()) {
        let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{a}</text>"#, H - PAD + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{b}</text>"#, W - PAD, H - PAD + 16.0);
    }
    let _ = writeln!(s, "{}", polyline(observed, lo, hi, "#1f4e9c"));
    let _ = writeln!(s, "{}", polyline(predicted, lo, hi, "#d2691e"));
    let _ = writeln!(
        s,
        r##"<text x="{x}" y="20" fill="#1f4e9c">observed</text><text x="{x2}" y="20" fill="#d2691e">predicted</text>"##,
        x = W - 2.0 * PAD - 100.0,
        x2 = W - PAD - 60.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
