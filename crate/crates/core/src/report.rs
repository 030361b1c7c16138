//! CSV and SVG emission for result rows and training logs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::experiment::{median_series, ResultRow};
use crate::maddpg::StepLog;

pub const RESULT_COLUMNS: [&str; 16] = [
    "seed",
    "var",
    "value",
    "r_b",
    "r_e",
    "R_s",
    "SINR_r",
    "eps_theta",
    "alpha",
    "rho0",
    "pose_n",
    "pose_m",
    "p_F",
    "wall_time_s",
    "infeasible",
    "baseline",
];

pub const LOG_COLUMNS: [&str; 9] = [
    "episode",
    "step",
    "reward",
    "R_s",
    "alpha",
    "rho0",
    "pose_index",
    "p_F",
    "critic_loss",
];

/// `x` rounded to 12 significant digits, shortest round-trip form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Result rows as CSV; `timing = false` blanks the wall-time column so the
/// output is a pure function of configuration and seeds.
pub fn results_csv(rows: &[ResultRow], timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.var.clone(),
            r.value.map(fmt_sig).unwrap_or_default(),
            fmt_sig(r.r_b),
            fmt_sig(r.r_e),
            fmt_sig(r.r_s),
            fmt_sig(r.sinr_r),
            fmt_sig(r.eps_theta),
            fmt_sig(r.alpha),
            fmt_sig(r.rho0),
            opt(r.pose_n),
            opt(r.pose_m),
            fmt_sig(r.p_f),
            if timing {
                fmt_sig(r.wall_time_s)
            } else {
                String::new()
            },
            r.infeasible.to_string(),
            r.baseline.to_string(),
        ])?;
    }
    finish(w)
}

pub fn log_csv(log: &[StepLog]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LOG_COLUMNS)?;
    for l in log {
        w.write_record([
            l.episode.to_string(),
            l.step.to_string(),
            fmt_sig(l.reward),
            fmt_sig(l.r_s),
            fmt_sig(l.alpha),
            fmt_sig(l.rho0),
            l.pose_index.to_string(),
            fmt_sig(l.p_f),
            l.critic_loss.map(fmt_sig).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Encoding(e.to_string()))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Median `R_s` against the sweep variable, one polyline per scheme.
pub fn results_svg(rows: &[ResultRow], title: &str) -> String {
    let series = median_series(rows);
    let xlabel = rows.first().map(|r| r.var.clone()).unwrap_or_default();
    let named: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(b, p)| (b.to_string(), p))
        .collect();
    line_plot(&named, title, &xlabel, "median R_s (bit/s/Hz)")
}

/// Single-file SVG line plot.
pub fn line_plot(
    series: &[(String, Vec<(f64, f64)>)],
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 64.0, 150.0, 36.0, 48.0);
    let pts = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (w - mr + ml) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{ml} {mt} V{} H{}" fill="none" stroke="black"/>"#,
        h - mb,
        w - mr
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(fx),
            h - mb + 16.0,
            short(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            sy(fy) + 4.0,
            short(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (w - mr + ml) / 2.0,
        h - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (h - mb + mt) / 2.0,
        (h - mb + mt) / 2.0,
        escape(ylabel)
    );
    for (i, (name, p)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = p
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !d.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                d.join(" ")
            );
        }
        let ly = mt + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - mr + 10.0,
            w - mr + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            w - mr + 36.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
