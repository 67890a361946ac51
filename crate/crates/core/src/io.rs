//! Artifact persistence: trace and success-map CSVs, SVG plots, instance
//! JSON and provenance sidecars.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. CSV headers are fixed; provenance goes to
//! `<artifact>.meta.json` next to the artifact (and into the `<metadata>`
//! element of SVGs).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::SuccessMap;
use crate::instances::Instance;
use crate::solvers::RunTrace;
use crate::Scalar;

pub const TRACE_HEADER: &str = "epoch,step_size,dist,fval,moreau_grad_norm";
pub const MAP_HEADER: &str = "rho,mu0_times_m,success,final_dist";

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|v| fmt_float(v.to_f64_lossy())).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// One parsed trace line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub step_size: f64,
    pub dist: Option<f64>,
    pub fval: Option<f64>,
    pub moreau_grad_norm: Option<f64>,
}

pub fn trace_csv<T: Scalar>(trace: &RunTrace<T>) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            fmt_float(r.step_size.to_f64_lossy()),
            fmt_opt(r.dist),
            fmt_opt(r.fval),
            fmt_opt(r.moreau_grad_norm)
        );
    }
    out
}

pub fn emit_trace_csv<T: Scalar>(trace: &RunTrace<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &trace_csv(trace))
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| bad(line, format!("'{s}': {e}")))
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line).map(Some)
    }
}

fn check_header(text: &str, header: &str) -> Result<()> {
    match text.lines().next() {
        Some(h) if h.trim_end() == header => Ok(()),
        Some(h) => Err(bad(1, format!("expected header '{header}', found '{h}'"))),
        None => Err(Error::Format("empty file".into())),
    }
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    check_header(text, TRACE_HEADER)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let n = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(n, format!("expected 5 fields, found {}", f.len())));
        }
        rows.push(TraceRow {
            epoch: f[0].trim().parse().map_err(|e| bad(n, e))?,
            step_size: parse_f64(f[1], n)?,
            dist: parse_opt(f[2], n)?,
            fval: parse_opt(f[3], n)?,
            moreau_grad_norm: parse_opt(f[4], n)?,
        });
    }
    Ok(rows)
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    parse_trace_csv(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRow {
    pub rho: f64,
    pub mu0_times_m: f64,
    pub success: bool,
    pub final_dist: f64,
}

/// Cells in row-major order (`ρ` outer, `μ0` inner).
pub fn map_rows(map: &SuccessMap) -> Vec<MapRow> {
    let mut rows = Vec::with_capacity(map.rho_grid.len() * map.mu0_grid.len());
    for (i, &rho) in map.rho_grid.iter().enumerate() {
        for (j, &mu) in map.mu0_grid.iter().enumerate() {
            rows.push(MapRow {
                rho,
                mu0_times_m: mu,
                success: map.cells[i][j],
                final_dist: map.final_dist[i][j],
            });
        }
    }
    rows
}

pub fn map_csv(map: &SuccessMap) -> String {
    let mut out = String::from(MAP_HEADER);
    out.push('\n');
    for r in map_rows(map) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(r.rho),
            fmt_float(r.mu0_times_m),
            u8::from(r.success),
            fmt_float(r.final_dist)
        );
    }
    out
}

pub fn parse_map_csv(text: &str) -> Result<Vec<MapRow>> {
    check_header(text, MAP_HEADER)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let n = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(n, format!("expected 4 fields, found {}", f.len())));
        }
        let success = match f[2].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(n, format!("bad success flag '{other}'"))),
        };
        rows.push(MapRow {
            rho: parse_f64(f[0], n)?,
            mu0_times_m: parse_f64(f[1], n)?,
            success,
            final_dist: parse_f64(f[3], n)?,
        });
    }
    Ok(rows)
}

pub fn read_map_csv(path: impl AsRef<Path>) -> Result<Vec<MapRow>> {
    parse_map_csv(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Svg,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(MapFormat::Csv),
            "svg" => Some(MapFormat::Svg),
            _ => None,
        }
    }
}

pub fn emit_map(map: &SuccessMap, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
    let body = match format {
        MapFormat::Csv => map_csv(map),
        MapFormat::Svg => heatmap_svg(&map_rows(map), &format!("{} success map", map.kind), None)?,
    };
    write_file(path.as_ref(), &body)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn sorted_unique(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// Success heatmap: `μ0·m` on the horizontal axis, `ρ` increasing upward,
/// one `rect.cell` per grid cell, white for success and black for failure.
pub fn heatmap_svg(rows: &[MapRow], title: &str, metadata: Option<&str>) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Format("success map has no cells".into()));
    }
    let rhos = sorted_unique(rows.iter().map(|r| r.rho));
    let mus = sorted_unique(rows.iter().map(|r| r.mu0_times_m));
    let cell = 24.0;
    let (left, top) = (70.0, 40.0);
    let w = cell * mus.len() as f64;
    let h = cell * rhos.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        left + w + 20.0,
        top + h + 60.0,
        left + w + 20.0,
        top + h + 60.0
    );
    if let Some(meta) = metadata {
        let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(meta));
    }
    let _ = writeln!(s, r##"<rect x="0" y="0" width="100%" height="100%" fill="#808080"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        left + w / 2.0,
        xml_escape(title)
    );
    for r in rows {
        let j = mus.iter().position(|&v| v == r.mu0_times_m).expect("present");
        let i = rhos.iter().position(|&v| v == r.rho).expect("present");
        let x = left + cell * j as f64;
        let y = top + h - cell * (i + 1) as f64;
        let fill = if r.success { "#ffffff" } else { "#000000" };
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"><title>rho={} mu0*m={} dist={:e}</title></rect>"#,
            r.rho, r.mu0_times_m, r.final_dist
        );
    }
    for (i, rho) in rhos.iter().enumerate() {
        let y = top + h - cell * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end" dominant-baseline="middle">{rho:.3}</text>"#,
            left - 4.0,
            y
        );
    }
    for (j, mu) in mus.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{mu:.0}</text>"#,
            top + h + 14.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">initial stepsize (x 1/m)</text>"#,
        left + w / 2.0,
        top + h + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">decay factor</text>"#,
        top + h / 2.0,
        top + h / 2.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// A named curve for [`convergence_svg`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-scale line plot of positive values against the epoch.
pub fn convergence_svg(series: &[Series], ylabel: &str, metadata: Option<&str>) -> Result<String> {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.1 > 0.0 && p.1.is_finite());
    let (mut x_max, mut lo, mut hi) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x_max = x_max.max(x);
        lo = lo.min(y.log10());
        hi = hi.max(y.log10());
    }
    if !lo.is_finite() {
        return Err(Error::Format("nothing to plot: no positive values".into()));
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let (left, top, w, h) = (70.0, 30.0, 480.0, 300.0);
    let sx = |x: f64| left + w * x / x_max;
    let sy = |y: f64| top + h * (hi - y.log10()) / (hi - lo);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        left + w + 140.0,
        top + h + 50.0,
        left + w + 140.0,
        top + h + 50.0
    );
    if let Some(meta) = metadata {
        let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(meta));
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#000000"/>"##
    );
    let mut e = lo as i64;
    while e as f64 <= hi {
        let y = sy(10f64.powi(e as i32));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="end" dominant-baseline="middle">1e{e}</text>"##,
            left + w,
            left - 4.0
        );
        e += 1;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">epoch (0 .. {x_max})</text>"#,
        left + w / 2.0,
        top + h + 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + h / 2.0,
        top + h / 2.0,
        xml_escape(ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = top + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            left + w + 10.0,
            xml_escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Distance series of a parsed trace, with the column chosen by name.
pub fn trace_series(rows: &[TraceRow], column: &str, label: &str) -> Result<Series> {
    let pick: fn(&TraceRow) -> Option<f64> = match column {
        "dist" => |r| r.dist,
        "fval" => |r| r.fval,
        "moreau_grad_norm" => |r| r.moreau_grad_norm,
        "step_size" => |r| Some(r.step_size),
        other => return Err(Error::Format(format!("unknown trace column '{other}'"))),
    };
    Ok(Series {
        label: label.to_string(),
        points: rows.iter().filter_map(|r| pick(r).map(|v| (r.epoch as f64, v))).collect(),
    })
}

pub fn save_instance<T: Scalar>(instance: &Instance<T>, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string(instance).map_err(|e| Error::Format(e.to_string()))?;
    write_file(path.as_ref(), &text)
}

pub fn load_instance<T: Scalar>(path: impl AsRef<Path>) -> Result<Instance<T>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}

/// Provenance written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub instance_seed: Option<u64>,
    pub x0_seed: Option<u64>,
    pub order_seed: Option<u64>,
    /// TOML text of the effective configuration.
    pub config: Option<String>,
    pub inputs: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "incopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            instance_seed: None,
            x0_seed: None,
            order_seed: None,
            config: None,
            inputs: Vec::new(),
        }
    }

    pub fn with_config(mut self, cfg: &ExperimentConfig) -> Result<Self> {
        self.instance_seed = Some(cfg.instance.seed());
        self.x0_seed = Some(cfg.x0_seed);
        self.order_seed = Some(cfg.order_seed);
        self.config = Some(cfg.to_toml_string()?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

/// Writes `<artifact>.meta.json`.
pub fn write_meta(artifact: impl AsRef<Path>, prov: &Provenance) -> Result<PathBuf> {
    let path = meta_path(artifact.as_ref());
    write_file(&path, &(prov.to_json()? + "\n"))?;
    Ok(path)
}

pub fn read_meta(artifact: impl AsRef<Path>) -> Result<Provenance> {
    let text = fs::read_to_string(meta_path(artifact.as_ref()))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    write_file(path.as_ref(), contents)
}
