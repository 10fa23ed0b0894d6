//! Bare-bones SVG charts: axes, bars or polylines, and a legend. No styling
//! beyond a fixed palette.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    s
}

fn y_ticks(s: &mut String, y_max: f64) {
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * i as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 4.0,
            y + 4.0,
            v
        )
        .unwrap();
    }
}

fn nice_max(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.fold(0.0f64, f64::max);
    if m > 0.0 {
        m * 1.05
    } else {
        1.0
    }
}

/// Vertical bars, one per label.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = header(title);
    let y_max = nice_max(values.iter().copied());
    y_ticks(&mut s, y_max);
    let n = values.len().max(1) as f64;
    let slot = (WIDTH - 2.0 * MARGIN) / n;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = plot_h * v / y_max;
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
            HEIGHT - MARGIN - h,
            slot * 0.7,
            PALETTE[0]
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + slot * 0.35,
            HEIGHT - MARGIN + 14.0,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per named series.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = header(title);
    let points = series.iter().flat_map(|(_, p)| p.iter());
    let x_min = points.clone().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = if x_min.is_finite() && x_max > x_min { (x_min, x_max) } else { (0.0, 1.0) };
    let y_max = nice_max(points.map(|p| p.1));
    y_ticks(&mut s, y_max);
    for i in 0..=4 {
        let v = x_min + (x_max - x_min) * i as f64 / 4.0;
        let x = MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / 4.0;
        writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{v:.3}</text>"#, HEIGHT - MARGIN + 14.0).unwrap();
    }
    let sx = |x: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * (x - x_min) / (x_max - x_min);
    let sy = |y: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * y / y_max;
    for (k, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 14.0 * k as f64;
        writeln!(
            s,
            r#"<text x="{}" y="{ly:.1}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            escape(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
