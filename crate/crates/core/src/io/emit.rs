use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Trajectory;
use crate::modal::MigrationReport;
use crate::{Error, Result};

const LOCK_FILE: &str = ".planewave.lock";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formats {
    pub csv: bool,
    pub summary: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            csv: true,
            summary: true,
            svg: true,
        }
    }
}

impl Formats {
    /// Comma-separated subset of `csv`, `summary`, `svg`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut f = Formats {
            csv: false,
            summary: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => f.csv = true,
                "summary" => f.summary = true,
                "svg" => f.svg = true,
                other => return Err(Error::Argument(format!("unknown output format '{other}'"))),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub tool: String,
    pub version: String,
    pub inputs_sha256: String,
    pub files: Vec<ManifestEntry>,
    /// Digest over the sorted file entries and the inputs digest.
    pub digest: String,
    pub note: String,
}

struct DirLock {
    path: PathBuf,
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes result files into one directory and records them in a manifest.
/// A lock file keeps concurrent runs out of the same directory.
pub struct Emitter {
    dir: PathBuf,
    formats: Formats,
    inputs_sha256: String,
    files: Vec<ManifestEntry>,
    _lock: DirLock,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Twelve significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

impl Emitter {
    pub fn create(dir: impl AsRef<Path>, formats: Formats, inputs: &[u8]) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Locked(dir))
            }
            Err(e) => return Err(Error::io(&path, e)),
        }
        Ok(Emitter {
            dir,
            formats,
            inputs_sha256: sha_hex(inputs),
            files: Vec::new(),
            _lock: DirLock { path },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn formats(&self) -> Formats {
        self.formats
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha_hex(bytes),
        });
        Ok(path)
    }

    /// Column-major table. Header names carry their units.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[String],
        columns: &[&[f64]],
    ) -> Result<Option<PathBuf>> {
        if !self.formats.csv {
            return Ok(None);
        }
        let bytes = csv_bytes(header, columns)?;
        self.write(name, &bytes).map(Some)
    }

    pub fn trajectory(&mut self, prefix: &str, traj: &Trajectory) -> Result<Vec<PathBuf>> {
        if !self.formats.csv {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (name, header, cols) in trajectory_tables(traj) {
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            if let Some(p) = self.csv(&format!("{prefix}_{name}.csv"), &header, &refs)? {
                out.push(p);
            }
        }
        Ok(out)
    }

    pub fn summary<T: Serialize>(&mut self, name: &str, value: &T) -> Result<Option<PathBuf>> {
        if !self.formats.summary {
            return Ok(None);
        }
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| Error::Argument(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes()).map(Some)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<Option<PathBuf>> {
        if !self.formats.svg {
            return Ok(None);
        }
        let text = plot.render();
        self.write(name, text.as_bytes()).map(Some)
    }

    /// Writes `manifest.json` and releases the lock.
    pub fn finish(mut self) -> Result<ResultBundle> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut h = Sha256::new();
        h.update(self.inputs_sha256.as_bytes());
        for f in &self.files {
            h.update(f.path.as_bytes());
            h.update(b"\0");
            h.update(f.sha256.as_bytes());
        }
        let bundle = ResultBundle {
            dir: self.dir.clone(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs_sha256: self.inputs_sha256.clone(),
            files: self.files.clone(),
            digest: hex::encode(h.finalize()),
            note: "deterministic: fixed-step integration, no random seeds, no timestamps".into(),
        };
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'a str,
            version: &'a str,
            inputs_sha256: &'a str,
            files: &'a [ManifestEntry],
            digest: &'a str,
            note: &'a str,
        }
        let m = Manifest {
            tool: &bundle.tool,
            version: &bundle.version,
            inputs_sha256: &bundle.inputs_sha256,
            files: &bundle.files,
            digest: &bundle.digest,
            note: &bundle.note,
        };
        let mut text =
            serde_json::to_string_pretty(&m).map_err(|e| Error::Argument(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(bundle)
    }
}

pub fn csv_bytes(header: &[String], columns: &[&[f64]]) -> Result<Vec<u8>> {
    if header.len() != columns.len() {
        return Err(Error::Argument("header and column counts differ".into()));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Argument("columns have different lengths".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Argument(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for k in 0..rows {
        w.write_record(columns.iter().map(|c| format_value(c[k])))
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Argument(e.to_string()))
}

type Table = (&'static str, Vec<String>, Vec<Vec<f64>>);

/// Node, bus and branch tables of a trajectory, each led by `time_s`.
pub fn trajectory_tables(traj: &Trajectory) -> Vec<Table> {
    let mut nodes_h = vec!["time_s".to_string()];
    let mut nodes = vec![traj.times.clone()];
    for (i, bus) in traj.node_buses.iter().enumerate() {
        nodes_h.push(format!("delta_{bus}_rad"));
        nodes.push(traj.delta[i].clone());
        nodes_h.push(format!("domega_{bus}_rad_per_s"));
        nodes.push(traj.omega[i].clone());
        nodes_h.push(format!("v_{bus}_pu"));
        nodes.push(traj.v[i].clone());
        nodes_h.push(format!("momentum_{bus}_s"));
        nodes.push(traj.momentum[i].clone());
    }
    nodes_h.push("em_share_1".into());
    nodes.push(traj.em_share.clone());
    let mut bus_h = vec!["time_s".to_string()];
    let mut bus = vec![traj.times.clone()];
    for (b, id) in traj.bus_ids.iter().enumerate() {
        bus_h.push(format!("v_{id}_pu"));
        bus.push(traj.bus_v[b].clone());
        bus_h.push(format!("angle_{id}_rad"));
        bus.push(traj.bus_angle[b].clone());
    }
    let mut br_h = vec!["time_s".to_string()];
    let mut br = vec![traj.times.clone()];
    for (l, id) in traj.branch_ids.iter().enumerate() {
        br_h.push(format!("p_{id}_pu"));
        br.push(traj.line_p[l].clone());
        br_h.push(format!("q_{id}_pu"));
        br.push(traj.line_q[l].clone());
    }
    vec![
        ("nodes", nodes_h, nodes),
        ("buses", bus_h, bus),
        ("branches", br_h, br),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesStyle {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: SeriesStyle,
}

impl PlotSeries {
    pub fn line(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        PlotSeries {
            name: name.into(),
            x,
            y,
            style: SeriesStyle::Line,
        }
    }

    pub fn points(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        PlotSeries {
            name: name.into(),
            x,
            y,
            style: SeriesStyle::Points,
        }
    }
}

/// Static SVG chart.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<PlotSeries>,
    /// Straight segments drawn under the series, `((x0, y0), (x1, y1))`.
    pub segments: Vec<((f64, f64), (f64, f64))>,
    /// Horizontal reference line and its label.
    pub hline: Option<(f64, String)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 150.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    } else {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

impl Plot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with_series(mut self, s: PlotSeries) -> Self {
        self.series.push(s);
        self
    }

    /// Send and receive modes in the complex plane, each pair joined by its
    /// migration segment.
    pub fn mode_scatter(report: &MigrationReport) -> Self {
        let mut p = Plot::new("Mode migration", "sigma (1/s)", "omega (rad/s)");
        let (mut sx, mut sy, mut rx, mut ry) = (vec![], vec![], vec![], vec![]);
        for pair in &report.pairs {
            sx.push(pair.send.sigma);
            sy.push(pair.send.omega);
            rx.push(pair.recv.sigma);
            ry.push(pair.recv.omega);
            p.segments.push((
                (pair.send.sigma, pair.send.omega),
                (pair.recv.sigma, pair.recv.omega),
            ));
        }
        for m in &report.unpaired_send {
            sx.push(m.sigma);
            sy.push(m.omega);
        }
        for m in &report.unpaired_recv {
            rx.push(m.sigma);
            ry.push(m.omega);
        }
        p.series.push(PlotSeries::points("send", sx, sy));
        p.series.push(PlotSeries::points("receive", rx, ry));
        p
    }

    pub fn render(&self) -> String {
        let finite = |v: &&f64| v.is_finite();
        let mut xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.x.iter().filter(finite).copied())
            .collect();
        let mut ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.y.iter().filter(finite).copied())
            .collect();
        for ((x0, y0), (x1, y1)) in &self.segments {
            xs.extend([*x0, *x1]);
            ys.extend([*y0, *y1]);
        }
        if let Some((y, _)) = &self.hline {
            ys.push(*y);
        }
        let (x0, x1) = span(
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let (y0, y1) = span(
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let pw = W - ML - MR;
        let ph = H - MT - MB;
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MT + (y1 - y) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            ML + pw / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(fx),
                MT + ph + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                ML - 6.0,
                py(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ML + pw / 2.0,
            H - 10.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            MT + ph / 2.0,
            MT + ph / 2.0,
            esc(&self.y_label)
        );
        for ((a, b), (c, d)) in &self.segments {
            let _ = writeln!(
                s,
                r##"<line class="segment" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999"/>"##,
                px(*a),
                py(*b),
                px(*c),
                py(*d)
            );
        }
        if let Some((y, label)) = &self.hline {
            let _ = writeln!(
                s,
                r##"<line class="overlay" x1="{ML}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000000" stroke-dasharray="6 4"/>"##,
                py(*y),
                ML + pw,
                py(*y)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                ML + pw + 4.0,
                py(*y) + 4.0,
                esc(label)
            );
        }
        for (k, ser) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> = ser
                .x
                .iter()
                .zip(&ser.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| (px(x), py(y)))
                .collect();
            let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, esc(&ser.name));
            match ser.style {
                SeriesStyle::Line => {
                    let mut d = String::new();
                    for (x, y) in &pts {
                        let _ = write!(d, "{x:.2},{y:.2} ");
                    }
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        d.trim_end()
                    );
                }
                SeriesStyle::Points => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#
                        );
                    }
                }
            }
            let _ = writeln!(s, "</g>");
            let ly = MT + 14.0 + 18.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
                ML + pw + 10.0,
                ML + pw + 28.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                ML + pw + 32.0,
                ly + 4.0,
                esc(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}
