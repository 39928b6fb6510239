use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::modal::TimeSeries;
use crate::{Error, Result};

/// Which CSV columns to read. `columns` pairs a header name with the label
/// given to the resulting series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub columns: Vec<(String, String)>,
}

impl ColumnMap {
    pub fn new(time: impl Into<String>) -> Self {
        ColumnMap {
            time: time.into(),
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, header: impl Into<String>, label: impl Into<String>) -> Self {
        self.columns.push((header.into(), label.into()));
        self
    }
}

/// Interval without samples longer than five nominal steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmuData {
    pub series: Vec<TimeSeries>,
    pub dt: f64,
    pub resampled: bool,
    /// Per series: `max |f''| h^2 / 8` with `f''` from second divided
    /// differences and `h` the largest raw spacing. Zero when not resampled.
    pub interpolation_error_bound: Vec<f64>,
    pub gaps: Vec<Gap>,
    pub warnings: Vec<String>,
}

/// Header names of a CSV document.
pub fn csv_headers(text: &str) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let h = rdr.headers().map_err(|e| Error::Ingestion(e.to_string()))?;
    Ok(h.iter().map(str::to_string).collect())
}

pub fn ingest_pmu_csv(path: impl AsRef<Path>, map: &ColumnMap) -> Result<PmuData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_pmu_str(&text, map)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn interpolate(t: &[f64], y: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|&ti| ti <= x).clamp(1, t.len() - 1);
    let (t0, t1) = (t[k - 1], t[k]);
    let w = (x - t0) / (t1 - t0);
    y[k - 1] + w * (y[k] - y[k - 1])
}

pub fn ingest_pmu_str(text: &str, map: &ColumnMap) -> Result<PmuData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingestion(format!("column '{name}' not found")))
    };
    let t_col = find(&map.time)?;
    let cols: Vec<usize> = map
        .columns
        .iter()
        .map(|(h, _)| find(h))
        .collect::<Result<_>>()?;
    let mut t = Vec::new();
    let mut data = vec![Vec::new(); cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingestion(e.to_string()))?;
        let line = row + 2;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| Error::Ingestion(format!("line {line}: '{s}' is not a number")))
        };
        t.push(num(t_col)?);
        for (d, &c) in data.iter_mut().zip(&cols) {
            d.push(num(c)?);
        }
    }
    if t.len() < 3 {
        return Err(Error::Ingestion(
            "at least three samples are required".into(),
        ));
    }
    if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Ingestion(format!(
            "timestamps not strictly increasing at row {} ({} after {})",
            k + 2,
            t[k + 1],
            t[k]
        )));
    }
    let diffs: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let dt = median(diffs.clone());
    let tol = 1e-9 + 1e-6 * dt;
    let gaps: Vec<Gap> = t
        .windows(2)
        .filter(|w| w[1] - w[0] > 5.0 * dt)
        .map(|w| Gap {
            start: w[0],
            end: w[1],
        })
        .collect();
    let uniform = diffs.iter().all(|d| (d - dt).abs() <= tol);
    let mut warnings = Vec::new();
    for g in &gaps {
        let msg = format!("gap from {} s to {} s", g.start, g.end);
        warn!("{msg}");
        warnings.push(msg);
    }
    let (series, bounds) = if uniform {
        let series = data
            .into_iter()
            .zip(&map.columns)
            .map(|(d, (_, label))| {
                TimeSeries::new(dt, d, label.clone()).map(|s| s.with_start(t[0]))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = series.len();
        (series, vec![0.0; n])
    } else {
        let msg =
            format!("non-uniform timestamps resampled to dt = {dt} s by linear interpolation");
        warn!("{msg}");
        warnings.push(msg);
        let n = ((t[t.len() - 1] - t[0]) / dt + 1e-9).floor() as usize + 1;
        let grid: Vec<f64> = (0..n).map(|k| t[0] + k as f64 * dt).collect();
        let h_max = diffs.iter().copied().fold(0.0, f64::max);
        let mut series = Vec::new();
        let mut bounds = Vec::new();
        for (d, (_, label)) in data.iter().zip(&map.columns) {
            let mut f2 = 0.0f64;
            for k in 1..t.len() - 1 {
                let a = (d[k] - d[k - 1]) / (t[k] - t[k - 1]);
                let b = (d[k + 1] - d[k]) / (t[k + 1] - t[k]);
                f2 = f2.max((2.0 * (b - a) / (t[k + 1] - t[k - 1])).abs());
            }
            bounds.push(f2 * h_max * h_max / 8.0);
            let samples = grid.iter().map(|&x| interpolate(&t, d, x)).collect();
            series.push(TimeSeries::new(dt, samples, label.clone())?.with_start(t[0]));
        }
        (series, bounds)
    };
    Ok(PmuData {
        series,
        dt,
        resampled: !uniform,
        interpolation_error_bound: bounds,
        gaps,
        warnings,
    })
}
