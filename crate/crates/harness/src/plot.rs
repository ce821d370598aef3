//! Minimal SVG line plots of per-step error and spread against distance.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::run::LogFile;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_max, mut y_max) = (1e-9f64, 1e-9f64);
    for &(x, y) in all {
        if x.is_finite() {
            x_max = x_max.max(x);
        }
        if y.is_finite() {
            y_max = y_max.max(y);
        }
    }
    let sx = |x: f64| PAD + x / x_max * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y_max * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{x_max:.0}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y_max:.1}</text>"#, PAD - 4.0, PAD + 4.0);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.1},{:.1} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 90.0,
            PAD + 14.0 * i as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `ape.svg` and `spread.svg` for a set of logs into `dir`.
pub fn write_run_plots(logs: &[LogFile], dir: &Path) -> Result<()> {
    let labels: Vec<String> = logs.iter().map(|l| format!("{} (seed {})", l.method, l.seed)).collect();
    let ape: Vec<Series<'_>> = logs
        .iter()
        .zip(&labels)
        .map(|(l, label)| Series {
            label,
            points: l
                .log
                .records
                .iter()
                .map(|r| (r.distance, r.estimate.position.distance(r.gt.position())))
                .collect(),
        })
        .collect();
    let spread: Vec<Series<'_>> = logs
        .iter()
        .zip(&labels)
        .map(|(l, label)| Series {
            label,
            points: l.log.records.iter().map(|r| (r.distance, r.estimate.spread)).collect(),
        })
        .collect();
    for (name, title, y, series) in [
        ("ape.svg", "Position error", "APE (m)", &ape),
        ("spread.svg", "Particle spread", "spread (m)", &spread),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, line_plot(title, "distance traveled (m)", y, series)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
