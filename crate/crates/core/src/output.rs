//! Artifact rendering and atomic file emission.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::controller::{EventKind, SimResult};
use crate::error::Result;
use crate::history::Side;

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Event flag values of the trajectory CSV.
pub const FLAG_NONE: u8 = 0;
pub const FLAG_FEEDBACK: u8 = 1;
pub const FLAG_IMPULSE: u8 = 2;

/// Trajectory table `t,x0..,u0..,event_flag`.
///
/// A jump sample produces two rows at the same `t`: the left limit with
/// the input held before it, then the post-jump state flagged 2.
pub fn trajectory_csv(sim: &SimResult) -> String {
    let traj = &sim.trajectory;
    let (n, m) = (traj.dim(), sim.initial_input.len());
    let mut flags = vec![FLAG_NONE; traj.len()];
    for r in &sim.events.records {
        let f = match r.kind {
            EventKind::FeedbackUpdate => FLAG_FEEDBACK,
            EventKind::ImpulsePlusUpdate => FLAG_IMPULSE,
        };
        if let Some(slot) = flags.get_mut(r.sample_index) {
            *slot = (*slot).max(f);
        }
    }
    let inputs = sim.inputs_at_samples();

    let mut out = String::from("t");
    (0..n).for_each(|i| write!(out, ",x{i}").unwrap());
    (0..m).for_each(|j| write!(out, ",u{j}").unwrap());
    out.push_str(",event_flag\n");

    let mut row = |t: f64, x: &[f64], u: &[f64], flag: u8| {
        out.push_str(&fmt_f64(t));
        for v in x.iter().chain(u) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        writeln!(out, ",{flag}").unwrap();
    };
    let zeros = vec![0.0; m];
    for (i, &t) in traj.times().iter().enumerate() {
        if traj.is_discontinuity(i) {
            let before = if i == 0 { &zeros } else { &inputs[i - 1] };
            row(t, traj.sample(i, Side::Left), before, FLAG_NONE);
        }
        row(t, traj.sample(i, Side::Right), &inputs[i], flags[i]);
    }
    out
}

/// One row per update: `index,t,gap,kind,x_before..,x_after..,u_after..`.
pub fn events_csv(sim: &SimResult) -> String {
    let n = sim.trajectory.dim();
    let m = sim.initial_input.len();
    let mut out = String::from("index,t,gap,kind");
    (0..n).for_each(|i| write!(out, ",x{i}_before").unwrap());
    (0..n).for_each(|i| write!(out, ",x{i}_after").unwrap());
    (0..m).for_each(|j| write!(out, ",u{j}_after").unwrap());
    out.push('\n');
    for (i, r) in sim.events.records.iter().enumerate() {
        let kind = match r.kind {
            EventKind::FeedbackUpdate => "feedback",
            EventKind::ImpulsePlusUpdate => "impulse",
        };
        write!(out, "{i},{},{},{kind}", fmt_f64(r.time), fmt_f64(r.gap)).unwrap();
        for v in r.state_before.iter().chain(&r.state_after).chain(&r.held_input_after) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Generic table with a header and float cells.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Self-contained line chart of one or more `(t, y)` series.
pub fn svg_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let all = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (SVG_W - 2.0 * MARGIN);
    let sy = |y: f64| SVG_H - MARGIN - (y - y0) / (y1 - y0) * (SVG_H - 2.0 * MARGIN);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        SVG_W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN
    )
    .unwrap();
    if y0 < 0.0 && y1 > 0.0 {
        writeln!(
            out,
            r##"<line x1="{MARGIN}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
            SVG_W - MARGIN,
            y = sy(0.0)
        )
        .unwrap();
    }
    for (label, x, y, anchor) in [
        (format!("{x0:.4}"), MARGIN, SVG_H - MARGIN + 16.0, "start"),
        (format!("{x1:.4}"), SVG_W - MARGIN, SVG_H - MARGIN + 16.0, "end"),
        (format!("{y0:.4}"), MARGIN - 4.0, SVG_H - MARGIN, "end"),
        (format!("{y1:.4}"), MARGIN - 4.0, MARGIN + 4.0, "end"),
    ] {
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{label}</text>"#
        )
        .unwrap();
    }
    for (idx, (name, points)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let stride = points.len().div_ceil(MAX_POINTS).max(1);
        let mut d = String::new();
        for (j, &(x, y)) in points.iter().enumerate() {
            let last = j + 1 == points.len();
            if !(x.is_finite() && y.is_finite()) || (j % stride != 0 && !last) {
                continue;
            }
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2} {:.2} ", sx(x), sy(y)).unwrap();
        }
        writeln!(out, r#"<path d="{}" stroke="{color}" stroke-width="1.2" fill="none"/>"#, d.trim_end()).unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            SVG_W - MARGIN,
            MARGIN + 14.0 * idx as f64,
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot series `(t, x_i)` for each state component, both limits at jumps.
pub fn state_series(sim: &SimResult) -> Vec<(String, Vec<(f64, f64)>)> {
    let traj = &sim.trajectory;
    (0..traj.dim())
        .map(|c| {
            let mut pts = Vec::with_capacity(traj.len());
            for (i, &t) in traj.times().iter().enumerate() {
                if traj.is_discontinuity(i) {
                    pts.push((t, traj.sample(i, Side::Left)[c]));
                }
                pts.push((t, traj.sample(i, Side::Right)[c]));
            }
            (format!("x{c} ({})", sim.mode.name()), pts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456789.12345679, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn svg_is_well_formed() {
        let s = svg_chart("a < b", &[("x".into(), vec![(0.0, 1.0), (1.0, -1.0)])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert!(s.contains("M50.00"));
    }
}
