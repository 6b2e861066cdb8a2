//! Config parsing, run manifests, CSV series and snapshots, and a summary plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, FittedExponents};
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, FlowResult, StopReason};
use crate::geometry::{Ambient, GraphState};

/// Most snapshots written per run, besides the first and the last.
pub const MAX_INTERIOR_SNAPSHOTS: usize = 10;

/// Parses and validates a JSON config. Unknown keys are rejected and errors
/// name the offending JSON path.
pub fn parse_config(text: &str) -> Result<FlowConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: FlowConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config { path, message: e.into_inner().to_string() }
    })?;
    cfg.validated()
}

/// Canonical pretty JSON of a config; parsing it back yields the same text.
pub fn config_to_json(cfg: &FlowConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

fn fmt_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// The diagnostic series as CSV, one row per record.
pub fn series_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = DiagnosticsRecord::COLUMNS.join(",");
    out.push('\n');
    for rec in records {
        let row: Vec<String> = rec.values().iter().map(|&x| fmt_value(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Inverse of [`series_csv`].
pub fn parse_series(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != DiagnosticsRecord::COLUMNS.join(",") {
        return Err(Error::Precondition(format!("unexpected series header `{header}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let vals = parse_row(line, i + 2)?;
            let arr: [f64; 19] = vals.try_into().map_err(|v: Vec<f64>| {
                Error::Precondition(format!("line {}: expected 19 columns, got {}", i + 2, v.len()))
            })?;
            Ok(DiagnosticsRecord::from_values(arr))
        })
        .collect()
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Precondition(format!("line {lineno}: bad number `{s}`")))
        })
        .collect()
}

/// A profile snapshot as `theta,u` CSV.
pub fn snapshot_csv(state: &GraphState) -> String {
    let mut out = String::from("theta,u\n");
    for (th, u) in state.grid.theta().iter().zip(&state.u) {
        let _ = writeln!(out, "{},{}", fmt_value(*th), fmt_value(*u));
    }
    out
}

/// Reads `(theta, u)` pairs back from [`snapshot_csv`] output.
pub fn parse_snapshot(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("theta,u") {
        return Err(Error::Precondition("snapshot must start with `theta,u`".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| match parse_row(line, i + 2)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            other => {
                Err(Error::Precondition(format!("line {}: expected 2 columns, got {}", i + 2, other.len())))
            }
        })
        .collect()
}

/// Record indices written as snapshots: the first, the last and up to
/// [`MAX_INTERIOR_SNAPSHOTS`] evenly spaced ones in between.
pub fn snapshot_indices(len: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> =
        (0..=MAX_INTERIOR_SNAPSHOTS + 1).map(|j| j * (len - 1) / (MAX_INTERIOR_SNAPSHOTS + 1)).collect();
    idx.dedup();
    idx
}

/// Everything needed to reproduce and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: FlowConfig,
    pub tool_version: String,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
    pub stop_reason: Option<StopReason>,
    /// Set when the run aborted with an error rather than a stop condition.
    pub error: Option<String>,
    pub steps: usize,
    pub records: usize,
    pub t_star_est: Option<f64>,
    pub initial_pinching_passed: Option<bool>,
    pub exponents: FittedExponents,
}

impl RunManifest {
    pub fn new(config: &FlowConfig, outcome: &Result<FlowResult>, started_at: f64, finished_at: f64) -> Self {
        let mut m = Self {
            config: config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at,
            stop_reason: None,
            error: None,
            steps: 0,
            records: 0,
            t_star_est: None,
            initial_pinching_passed: None,
            exponents: FittedExponents::default(),
        };
        match outcome {
            Ok(res) => {
                m.stop_reason = Some(res.stop_reason);
                m.steps = res.steps;
                m.records = res.records.len();
                m.t_star_est = res.t_star_est;
                m.initial_pinching_passed = Some(res.initial_check.passed);
                m.exponents = FittedExponents::from_records(&res.records, config.ambient);
            }
            Err(e) => m.error = Some(e.to_string()),
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Writes `manifest.json` and, for completed runs, `series.csv`,
/// `snapshots/*.csv` and `summary.svg` into `dir`.
pub fn write_run(dir: &Path, manifest: &RunManifest, outcome: &Result<FlowResult>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.json"), manifest.to_json() + "\n")?;
    let Ok(res) = outcome else {
        return Ok(());
    };
    fs::write(dir.join("series.csv"), series_csv(&res.records))?;
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    for i in snapshot_indices(res.snapshots.len()) {
        fs::write(snap_dir.join(format!("snapshot_{i:05}.csv")), snapshot_csv(&res.snapshots[i]))?;
    }
    fs::write(dir.join("summary.svg"), summary_svg(&res.records, manifest.config.ambient))?;
    Ok(())
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 60.0;

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    log_x: bool,
    points: Vec<(f64, f64)>,
}

/// Two-panel SVG: distance to the best-fit sphere against the reference
/// radius, and `max |κ − 1|` against time, both on logarithmic value axes.
pub fn summary_svg(records: &[DiagnosticsRecord], ambient: Ambient) -> String {
    let dist = Panel {
        title: "distance to best-fit sphere",
        x_label: "reference radius (log)",
        y_label: "dist (log)",
        log_x: true,
        points: records.iter().map(|r| (r.theta_ref, r.dist_sphere)).collect(),
    };
    let kappa = match ambient {
        Ambient::Euclidean => Panel {
            title: "rescaled curvature deviation",
            x_label: "t",
            y_label: "max |Θκ − 1| (log)",
            log_x: false,
            points: records
                .iter()
                .map(|r| (r.t, (r.kt_max - 1.0).abs().max((r.kt_min - 1.0).abs())))
                .collect(),
        },
        Ambient::Hyperbolic => Panel {
            title: "curvature deviation",
            x_label: "t",
            y_label: "max |κ − 1| (log)",
            log_x: false,
            points: records.iter().map(|r| (r.t, r.kappa_deviation())).collect(),
        },
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        2.0 * PANEL_W,
        PANEL_H
    );
    draw_panel(&mut svg, 0.0, &dist);
    draw_panel(&mut svg, PANEL_W, &kappa);
    svg.push_str("</svg>\n");
    svg
}

fn draw_panel(svg: &mut String, x0: f64, panel: &Panel) {
    let tx = |x: f64| if panel.log_x { x.log10() } else { x };
    let pts: Vec<(f64, f64)> = panel
        .points
        .iter()
        .filter(|(x, y)| *y > 0.0 && y.is_finite() && x.is_finite() && (!panel.log_x || *x > 0.0))
        .map(|&(x, y)| (tx(x), y.log10()))
        .collect();
    let (left, top) = (x0 + MARGIN, 30.0);
    let (w, h) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 30.0 - MARGIN);
    let _ =
        writeln!(svg, r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);
    let _ =
        writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, left + w / 2.0, panel.title);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + w / 2.0,
        top + h + 40.0,
        panel.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        x0 + 15.0,
        top + h / 2.0,
        x0 + 15.0,
        top + h / 2.0,
        panel.y_label
    );
    if pts.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
            left + w / 2.0,
            top + h / 2.0
        );
        return;
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (xlo, xhi) = range(|p| p.0);
    let (ylo, yhi) = range(|p| p.1);
    let px = |x: f64| left + (x - xlo) / (xhi - xlo) * w;
    let py = |y: f64| top + h - (y - ylo) / (yhi - ylo) * h;
    let tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, anchor_x) in [(xlo, left), (xhi, left + w)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{}</text>"#,
            top + h + 16.0,
            tick(v, panel.log_x)
        );
    }
    for (v, anchor_y) in [(ylo, top + h), (yhi, top + 10.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor_y}" text-anchor="end">{}</text>"#,
            left - 4.0,
            tick(v, true)
        );
    }
    let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        path.join(" ")
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::InitialProfile;

    #[test]
    fn config_defaults_and_echo() {
        let cfg =
            parse_config(r#"{"ambient":"euclidean","p":2,"initial":{"kind":"sphere","r0":1}}"#).unwrap();
        assert_eq!(cfg.n_theta, 64);
        assert_eq!(cfg.c0, 0.1);
        assert_eq!(cfg.stop.u_max_stop, Some(10.0));
        let echo = config_to_json(&cfg);
        assert_eq!(config_to_json(&parse_config(&echo).unwrap()), echo);
    }

    #[test]
    fn config_errors_name_the_path() {
        let cases = [
            (r#"{"ambient":"euclidean","p":1,"initial":{"kind":"sphere","r0":1}}"#, "p"),
            (r#"{"ambient":"euclidean","p":2,"c0":0.6,"initial":{"kind":"sphere","r0":1}}"#, "c0"),
            (
                r#"{"ambient":"euclidean","p":2,"initial":{"kind":"sphere","r0":1},"stepper":{"saftey":1}}"#,
                "stepper",
            ),
            (r#"{"ambient":"elliptic","p":2,"initial":{"kind":"sphere","r0":1}}"#, "ambient"),
            (r#"{"ambient":"euclidean","p":2,"n_theta":8,"initial":{"kind":"sphere","r0":1}}"#, "n_theta"),
        ];
        for (text, want) in cases {
            match parse_config(text) {
                Err(Error::Config { path, .. }) => assert!(path.starts_with(want), "{path} vs {want}"),
                other => panic!("expected config error for {text}, got {other:?}"),
            }
        }
        let err =
            parse_config(r#"{"ambient":"euclidean","p":1,"initial":{"kind":"sphere","r0":1}}"#).unwrap_err();
        assert!(err.to_string().contains("1 < p"));
    }

    #[test]
    fn series_roundtrip_is_exact() {
        let mut v = [0.0; 19];
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64 + 0.1).powf(1.7) / 3.0;
        }
        v[13] = f64::NAN;
        let rec = DiagnosticsRecord::from_values(v);
        let text = series_csv(&[rec, rec]);
        assert!(text.starts_with("t,dt,u_min,u_max,osc,v_max,kappa_min,kappa_max,F_min,F_max,z_max,B_min,"));
        assert!(!text.contains('\r'));
        let back = parse_series(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back[0].values().iter().zip(v) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let cfg = FlowConfig::new(
            Ambient::Euclidean,
            2.0,
            InitialProfile::PerturbedSphere { r0: 1.0, eps: 0.05, k: 2 },
        );
        let state = crate::Solver::new(&cfg).unwrap().initial_state();
        let back = parse_snapshot(&snapshot_csv(&state)).unwrap();
        assert_eq!(back.len(), 64);
        for ((th, u), (th0, u0)) in back.iter().zip(state.grid.theta().iter().zip(&state.u)) {
            assert_eq!(th, th0);
            assert_eq!(u, u0);
        }
    }

    #[test]
    fn snapshot_selection() {
        assert_eq!(snapshot_indices(0), Vec::<usize>::new());
        assert_eq!(snapshot_indices(1), vec![0]);
        assert_eq!(snapshot_indices(3), vec![0, 1, 2]);
        let idx = snapshot_indices(1000);
        assert_eq!(idx.len(), MAX_INTERIOR_SNAPSHOTS + 2);
        assert_eq!((idx[0], *idx.last().unwrap()), (0, 999));
    }

    #[test]
    fn svg_has_both_panels() {
        let recs: Vec<DiagnosticsRecord> = (1..30)
            .map(|i| {
                let mut v = [1.0; 19];
                v[0] = i as f64;
                v[13] = i as f64;
                v[18] = 1.0 / (i * i) as f64;
                v[6] = 1.0 + (-(i as f64)).exp();
                DiagnosticsRecord::from_values(v)
            })
            .collect();
        let svg = summary_svg(&recs, Ambient::Hyperbolic);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("dist (log)"));
        assert!(summary_svg(&[], Ambient::Euclidean).contains("no data"));
    }
}
