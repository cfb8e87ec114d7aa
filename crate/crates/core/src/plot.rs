//! Minimal SVG line charts of summary rows, one series per method with a
//! shaded band of one standard deviation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::harness::{Method, SummaryRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

struct Series {
    method: Method,
    points: Vec<(f64, f64, f64)>,
}

/// Charts for a set of summary rows: metric against delta for each sampling
/// rate when deltas are present, otherwise metric against p.
pub fn charts(summary: &[SummaryRow]) -> Vec<(String, String)> {
    let usable: Vec<&SummaryRow> = summary.iter().filter(|s| s.mean.is_finite()).collect();
    if usable.is_empty() {
        return Vec::new();
    }
    let metric = usable[0].metric;
    let mut out = Vec::new();
    if usable.iter().all(|s| s.delta.is_finite()) {
        let mut by_p: BTreeMap<usize, Vec<&SummaryRow>> = BTreeMap::new();
        for s in &usable {
            by_p.entry(s.p_index).or_default().push(s);
        }
        for (pi, rows) in by_p {
            let series = collect(&rows, |s| s.delta);
            let title = format!("{metric} vs delta, p = {}", rows[0].p);
            out.push((format!("{metric}_vs_delta_p{pi}.svg"), render(&title, "delta", metric, &series)));
        }
    } else if usable.iter().all(|s| s.p.is_finite()) {
        let series = collect(&usable, |s| s.p);
        out.push((format!("{metric}_vs_p.svg"), render(&format!("{metric} vs p"), "p", metric, &series)));
    }
    out
}

fn collect(rows: &[&SummaryRow], x: impl Fn(&SummaryRow) -> f64) -> Vec<Series> {
    let mut by_method: BTreeMap<Method, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for s in rows {
        by_method.entry(s.method).or_default().push((x(s), s.mean, s.std.max(0.0)));
    }
    by_method
        .into_iter()
        .map(|(method, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { method, points }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, sd) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - sd);
        y1 = y1.max(m + sd);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} V{bottom} H{right}" stroke="black" fill="none"/>"#
    );
    for t in 0..=4 {
        let fx = x0 + (x1 - x0) * t as f64 / 4.0;
        let fy = y0 + (y1 - y0) * t as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, sx(fx), bottom + 16.0, fx);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, left - 6.0, sy(fy) + 4.0, fy);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> = s.points.iter().map(|&(x, m, sd)| format!("{:.2},{:.2}", sx(x), sy(m + sd))).collect();
        let lower: Vec<String> = s.points.iter().rev().map(|&(x, m, sd)| format!("{:.2},{:.2}", sx(x), sy(m - sd))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = s.points.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", sx(x), sy(m))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for &(x, m, _) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(m));
        }
        let ly = top + 14.0 * k as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, right + 4.0 - 60.0, ly);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, right + 18.0 - 60.0, ly + 9.0, escape(&s.method.to_string()));
    }
    svg.push_str("</svg>\n");
    svg
}
