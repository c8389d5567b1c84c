//! Log-log SVG of excess risk against sample size.

use std::fmt::Write;

use anyhow::{bail, Result};

use mixsvm_core::harness::ExperimentResult;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Per-seed excess risks as points and the per-`n` medians as a line.
/// Non-positive excesses are drawn on the bottom edge.
pub fn sweep_svg(result: &ExperimentResult, title: &str) -> Result<String> {
    if result.rows.is_empty() {
        bail!("no rows to plot");
    }
    let medians = result.median_excess();
    let positive: Vec<f64> = result
        .rows
        .iter()
        .map(|r| r.excess_risk)
        .chain(medians.iter().map(|m| m.1))
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    // axis ranges in log10 decades
    let (ymin, ymax) = if positive.is_empty() {
        (-3.0, 0.0)
    } else {
        let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
        let hi = positive.iter().cloned().fold(0.0, f64::max).log10().ceil();
        (lo, hi.max(lo + 1.0))
    };
    let ns = result.rows.iter().map(|r| r.n as f64);
    let nlo = ns.clone().fold(f64::INFINITY, f64::min).log10();
    let nhi = ns.fold(0.0, f64::max).log10();
    let (xmin, xmax) = (nlo.floor(), nhi.ceil().max(nlo.floor() + 1.0));

    let px = |n: f64| LEFT + (n.log10() - xmin) / (xmax - xmin) * (W - LEFT - RIGHT);
    let py = |v: f64| {
        let l = if v > 0.0 { v.log10().max(ymin) } else { ymin };
        H - BOTTOM - (l - ymin) / (ymax - ymin) * (H - TOP - BOTTOM)
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title))?;
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0)?;
    for e in xmin as i32..=xmax as i32 {
        let x = px(10f64.powi(e));
        writeln!(s, r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="#ddd"/>"##)?;
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#, y1 + 16.0)?;
    }
    for e in ymin as i32..=ymax as i32 {
        let y = py(10f64.powi(e));
        writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##)?;
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, y + 4.0)?;
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, (x0 + x1) / 2.0, H - 12.0)?;
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">excess risk</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )?;
    for r in &result.rows {
        writeln!(
            s,
            r##"<circle class="seed" cx="{:.2}" cy="{:.2}" r="2.5" fill="#4a7ab5" fill-opacity="0.5"/>"##,
            px(r.n as f64),
            py(r.excess_risk)
        )?;
    }
    let pts: Vec<String> = medians
        .iter()
        .map(|&(n, m)| format!("{:.2},{:.2}", px(n as f64), py(m)))
        .collect();
    writeln!(s, r##"<polyline class="median" points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, pts.join(" "))?;
    for &(n, m) in &medians {
        writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#c0392b"/>"##, px(n as f64), py(m))?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
