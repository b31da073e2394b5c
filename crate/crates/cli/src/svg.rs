//! Minimal SVG scatter plot of estimates against truth with an identity
//! line. Deterministic output; no plotting dependency.

use std::fmt::Write as _;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;

pub fn scatter_svg(truth: &[f64], estimates: &[f64], title: &str) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in truth.iter().chain(estimates) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() || !hi.is_finite() || lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let scale = (SIZE - 2.0 * MARGIN) / (hi - lo);
    let to_x = |v: f64| MARGIN + (v - lo) * scale;
    let to_y = |v: f64| SIZE - MARGIN - (v - lo) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#,
        MARGIN
    );
    // axes
    let _ = writeln!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = SIZE - MARGIN,
        r = SIZE - MARGIN,
        t = MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">truth</text>"#,
        SIZE / 2.0 - 18.0,
        SIZE - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.1})">estimate</text>"#,
        SIZE / 2.0 + 24.0,
        SIZE / 2.0 + 24.0
    );
    // identity line
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        to_x(lo),
        to_y(lo),
        to_x(hi),
        to_y(hi)
    );
    for (t, e) in truth.iter().zip(estimates) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue" fill-opacity="0.75"/>"#,
            to_x(*t),
            to_y(*e)
        );
    }
    out.push_str("</svg>\n");
    out
}
