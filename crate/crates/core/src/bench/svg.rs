//! Static SVG figures: fidelity versus squeezing and latency bars.

use std::fmt::Write as _;
use std::path::Path;

use super::BenchStats;
use crate::error::{Error, Result};
use crate::pipeline::BinStats;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = write!(
        out,
        "<g stroke=\"black\" stroke-width=\"1\">\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\"/>\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\"/></g>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (x0 + x1) / 2.0,
        H - 15.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn y_tick(out: &mut String, y: f64, label: &str) {
    let _ = writeln!(
        out,
        "<line x1=\"{:.1}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>\
         <text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
        LEFT - 5.0,
        LEFT - 8.0,
        y + 4.0
    );
}

/// Mean fidelity per squeezing bin with a shaded ±σ band, one series per
/// engine. Empty bins are skipped rather than drawn at zero.
pub fn fidelity_svg(series: &[(&str, &[BinStats])]) -> Result<String> {
    let filled: Vec<(&str, Vec<&BinStats>)> = series
        .iter()
        .map(|(name, bins)| {
            (
                *name,
                bins.iter().filter(|b| b.mean.is_some()).collect::<Vec<_>>(),
            )
        })
        .collect();
    if filled.is_empty() || filled.iter().any(|(_, b)| b.is_empty()) {
        return Err(Error::Empty("fidelity bins"));
    }
    let x_lo = series
        .iter()
        .flat_map(|(_, b)| b.iter().map(|b| b.lo_db))
        .fold(f64::INFINITY, f64::min);
    let x_hi = series
        .iter()
        .flat_map(|(_, b)| b.iter().map(|b| b.hi_db))
        .fold(f64::NEG_INFINITY, f64::max);
    let lowest = filled
        .iter()
        .flat_map(|(_, b)| b.iter().map(|b| b.mean.unwrap() - b.std.unwrap_or(0.0)))
        .fold(1.0f64, f64::min);
    let y_lo = ((lowest - 0.005) * 50.0).floor() / 50.0;
    let y_lo = y_lo.clamp(0.0, 0.98);
    let y_hi = 1.0;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * (W - LEFT - RIGHT);
    let py =
        |y: f64| (H - BOTTOM) - (y.clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo) * (H - BOTTOM - TOP);

    let mut out = String::new();
    header(&mut out, "Mean state fidelity versus squeezing");
    axes(&mut out, "squeezing level (dB)", "fidelity");
    let steps = 5;
    for k in 0..=steps {
        let v = y_lo + (y_hi - y_lo) * k as f64 / steps as f64;
        y_tick(&mut out, py(v), &format!("{v:.3}"));
    }
    let mut x = x_lo;
    while x <= x_hi + 1e-9 {
        let _ = writeln!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.1}\" x2=\"{0:.2}\" y2=\"{2:.1}\" stroke=\"black\"/>\
             <text x=\"{0:.2}\" y=\"{3:.1}\" text-anchor=\"middle\">{x}</text>",
            px(x),
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0
        );
        x += ((x_hi - x_lo) / 10.0).max(1e-9);
    }
    for (s, (name, bins)) in filled.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let mut band = String::new();
        for (i, b) in bins.iter().enumerate() {
            let _ = write!(
                band,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                px(b.center_db()),
                py(b.mean.unwrap() + b.std.unwrap_or(0.0))
            );
        }
        for b in bins.iter().rev() {
            let _ = write!(
                band,
                "L{:.2},{:.2} ",
                px(b.center_db()),
                py(b.mean.unwrap() - b.std.unwrap_or(0.0))
            );
        }
        band.push('Z');
        let line: Vec<String> = bins
            .iter()
            .map(|b| format!("{:.2},{:.2}", px(b.center_db()), py(b.mean.unwrap())))
            .collect();
        let _ = writeln!(
            out,
            "<path class=\"band\" d=\"{band}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n\
             <polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.join(" ")
        );
        let ly = TOP + 12.0 + 18.0 * s as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            W - RIGHT - 120.0,
            W - RIGHT - 100.0,
            W - RIGHT - 94.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Mean latency per engine as labeled bars.
pub fn latency_svg(stats: &[BenchStats]) -> Result<String> {
    if stats.is_empty() {
        return Err(Error::Empty("benchmark stats"));
    }
    let top = stats
        .iter()
        .map(|s| s.mean_ms)
        .fold(0.0f64, f64::max)
        .max(1e-6)
        * 1.15;
    let py = |v: f64| (H - BOTTOM) - v / top * (H - BOTTOM - TOP);
    let mut out = String::new();
    header(&mut out, "Mean inference time per sequence");
    axes(&mut out, "engine", "latency (ms)");
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        y_tick(&mut out, py(v), &format!("{v:.3}"));
    }
    let slot = (W - LEFT - RIGHT) / stats.len() as f64;
    let bar = slot * 0.5;
    for (i, s) in stats.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = LEFT + slot * i as f64 + (slot - bar) / 2.0;
        let y = py(s.mean_ms);
        let _ = writeln!(
            out,
            "<rect class=\"bar\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar:.2}\" height=\"{:.2}\" fill=\"{color}\"/>\n\
             <text class=\"value\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.3} ms</text>\n\
             <text x=\"{:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            (H - BOTTOM) - y,
            x + bar / 2.0,
            y - 6.0,
            s.mean_ms,
            x + bar / 2.0,
            H - BOTTOM + 18.0,
            escape(&s.engine)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
