//! Experiment reports (JSON) and PGM slice images.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Sym2Field;

pub const CRATE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comparison used by a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Metric must be `<=` the limit.
    Max,
    /// Metric must be `>=` the limit.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: String,
    pub bound: Bound,
    pub limit: f64,
}

impl Threshold {
    pub fn max(metric: &str, limit: f64) -> Self {
        Threshold {
            metric: metric.into(),
            bound: Bound::Max,
            limit,
        }
    }

    pub fn min(metric: &str, limit: f64) -> Self {
        Threshold {
            metric: metric.into(),
            bound: Bound::Min,
            limit,
        }
    }

    pub fn holds(&self, value: f64) -> bool {
        match self.bound {
            Bound::Max => value <= self.limit,
            Bound::Min => value >= self.limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub path: String,
    pub width: usize,
    pub height: usize,
    /// Values mapped to 0 and 255.
    pub min: f64,
    pub max: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub version: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: Vec<Threshold>,
    /// Boolean checks that are not thresholds on a metric.
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Wall-clock seconds per stage; omitted in reproducible reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtimes: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl ExperimentReport {
    pub fn new(id: &str) -> Self {
        ExperimentReport {
            id: id.into(),
            version: CRATE_VERSION.into(),
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            thresholds: Vec::new(),
            checks: BTreeMap::new(),
            passed: false,
            images: Vec::new(),
            notes: Vec::new(),
            runtimes: None,
            timestamp: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("parameters serialize to JSON");
        self.params.insert(key.into(), v);
        self
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn check(&mut self, key: &str, ok: bool) -> &mut Self {
        self.checks.insert(key.into(), ok);
        self
    }

    pub fn threshold(&mut self, t: Threshold) -> &mut Self {
        self.thresholds.push(t);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn runtime(&mut self, stage: &str, seconds: f64) -> &mut Self {
        self.runtimes.get_or_insert_with(BTreeMap::new).insert(stage.into(), seconds);
        self
    }

    /// Evaluates thresholds and checks into `passed`. Missing or non-finite
    /// metrics fail.
    pub fn finish(&mut self) -> bool {
        let metrics_ok = self.metrics.values().all(|v| v.is_finite());
        let thresholds_ok = self
            .thresholds
            .iter()
            .all(|t| self.metrics.get(&t.metric).is_some_and(|v| t.holds(*v)));
        self.passed = metrics_ok && thresholds_ok && self.checks.values().all(|c| *c);
        self.passed
    }

    /// Threshold lines that did not hold, for diagnostics.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .thresholds
            .iter()
            .filter(|t| !self.metrics.get(&t.metric).is_some_and(|v| t.holds(*v)))
            .map(|t| {
                let op = match t.bound {
                    Bound::Max => "<=",
                    Bound::Min => ">=",
                };
                format!("{} = {:?} (need {op} {:e})", t.metric, self.metrics.get(&t.metric), t.limit)
            })
            .collect();
        out.extend(self.checks.iter().filter(|(_, ok)| !**ok).map(|(k, _)| format!("{k} failed")));
        out.extend(
            self.metrics
                .iter()
                .filter(|(_, v)| !v.is_finite())
                .map(|(k, v)| format!("{k} = {v} is not finite")),
        );
        out
    }

    /// Drops wall-clock data so identical runs serialize identically.
    pub fn strip_timing(&mut self) {
        self.runtimes = None;
        self.timestamp = None;
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Seconds since the Unix epoch, as a string.
pub fn unix_timestamp() -> String {
    let d = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

/// Encodes a row-major `width x height` image as binary PGM (P5, maxval 255)
/// with the linear map `[min, max] -> [0, 255]`. A constant image maps to 0.
pub fn encode_pgm(values: &[f64], width: usize, height: usize) -> Result<(Vec<u8>, f64, f64)> {
    if values.len() != width * height || values.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "image {width}x{height} needs {} values, got {}",
            width * height,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image values must be finite"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| {
        if span > 0.0 {
            ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    Ok((out, min, max))
}

/// 2D section of the pointwise Frobenius norm of `f` through the grid point
/// `fixed`, varying axes `rows` (slow) and `cols` (fast).
pub fn norm_slice(f: &Sym2Field, rows: usize, cols: usize, fixed: [usize; 4]) -> Result<(Vec<f64>, usize, usize)> {
    let grid = f.grid();
    if rows >= 4 || cols >= 4 || rows == cols {
        return Err(Error::invalid(format!("slice axes ({rows}, {cols}) must be distinct and < 4")));
    }
    if (0..4).any(|a| fixed[a] >= grid.dims[a]) {
        return Err(Error::invalid(format!("slice point {fixed:?} outside grid {:?}", grid.dims)));
    }
    let (h, w) = (grid.dims[rows], grid.dims[cols]);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let mut idx = fixed;
            idx[rows] = r;
            idx[cols] = c;
            out.push(f.at(grid.flat(idx))?.frobenius_norm());
        }
    }
    Ok((out, w, h))
}

/// Writes a slice image and returns its record.
pub fn write_slice(dir: &Path, name: &str, f: &Sym2Field, rows: usize, cols: usize, fixed: [usize; 4]) -> Result<ImageRecord> {
    let (values, width, height) = norm_slice(f, rows, cols, fixed)?;
    let (bytes, min, max) = encode_pgm(&values, width, height)?;
    fs::write(dir.join(name), bytes)?;
    Ok(ImageRecord {
        path: name.into(),
        width,
        height,
        min,
        max,
        description: format!("Frobenius norm, axes ({rows}, {cols}) through grid point {fixed:?}"),
    })
}
