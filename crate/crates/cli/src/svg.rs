//! Minimal deterministic SVG line and scatter panels.

use std::fmt::Write as _;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Joins the points with a polyline; otherwise draws markers only.
    pub line: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plots `log10 y`; non-positive values are dropped.
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel_svg(out: &mut String, p: &Panel, x_off: f64) {
    let pts: Vec<Vec<(f64, f64)>> = p
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!p.log_y || *y > 0.0))
                .map(|&(x, y)| (x, if p.log_y { y.log10() } else { y }))
                .collect()
        })
        .collect();
    let (x0, x1) = range(pts.iter().flatten().map(|q| q.0));
    let (y0, y1) = range(pts.iter().flatten().map(|q| q.1));
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| x_off + MARGIN_L + (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| MARGIN_T + h - (y - y0) / (y1 - y0) * h;

    writeln!(
        out,
        r#"<rect x="{:.2}" y="{MARGIN_T:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#,
        x_off + MARGIN_L
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        x_off + MARGIN_L + w / 2.0,
        escape(&p.title)
    )
    .unwrap();
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{xv:.3}</text>"#,
            sx(xv),
            MARGIN_T + h + 14.0
        )
        .unwrap();
        let ylab = if p.log_y { format!("1e{yv:.2}") } else { format!("{yv:.3}") };
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{ylab}</text>"#,
            x_off + MARGIN_L - 4.0,
            sy(yv) + 3.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
        x_off + MARGIN_L + w / 2.0,
        PANEL_H - 8.0,
        escape(&p.x_label)
    )
    .unwrap();
    let ly = if p.log_y { format!("{} (log10)", p.y_label) } else { p.y_label.clone() };
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x_off + 12.0,
        MARGIN_T + h / 2.0,
        x_off + 12.0,
        MARGIN_T + h / 2.0,
        escape(&ly)
    )
    .unwrap();
    for (k, (s, pts)) in p.series.iter().zip(&pts).enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        if s.line && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        for &(x, y) in pts {
            writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#,
                sx(x),
                sy(y)
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{colour}">{}</text>"#,
            x_off + MARGIN_L + 6.0,
            MARGIN_T + 12.0 + 12.0 * k as f64,
            escape(&s.label)
        )
        .unwrap();
    }
}

/// Panels laid out left to right.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, p) in panels.iter().enumerate() {
        panel_svg(&mut out, p, i as f64 * PANEL_W);
    }
    out.push_str("</svg>\n");
    out
}
