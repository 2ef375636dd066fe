//! CSV and JSON formats for profiles, sweeps and weak-measurement tables.
//!
//! Angles are written in degrees. Floats use Rust's shortest round-trip
//! formatting, so identical inputs give byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{FitMethod, SweepStatistics};
use crate::mzi::TheoryRow;
use crate::synth::{DetectorConfig, FringeModelParams, FringeProfile};
use crate::weakmeas::WeakMeasRow;

pub const PROFILE_HEADER: [&str; 2] = ["pixel_index", "intensity"];
pub const THEORY_HEADER: [&str; 6] = ["theta_deg", "v_with_r", "v_without_r", "z_abs", "weak_value_abs", "overlap"];
pub const SWEEP_HEADER: [&str; 5] = ["theta_deg", "v_mean", "v_std", "n_frames", "method"];
pub const WEAKMEAS_HEADER: [&str; 5] =
    ["theta_deg", "centroid_over_a", "weak_value_re_inferred", "weak_value_re_exact_eq2", "a_over_sigma"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
}

/// Radians to degrees, rounded to 1e-9° so grid angles print exactly.
pub fn theta_deg(theta: f64) -> f64 {
    (theta.to_degrees() * 1e9).round() / 1e9
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, IoError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IoError> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(IoError::Schema(format!("expected header {}, found {}", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T, IoError> {
    let raw = rec.get(i).ok_or_else(|| IoError::Schema(format!("row {line}: missing column {i}")))?.trim();
    raw.parse().map_err(|_| IoError::Schema(format!("row {line}: cannot parse '{raw}' in column {i}")))
}

/// One frame as `pixel_index,intensity`.
pub fn write_profile_csv<W: Write>(w: W, profile: &FringeProfile) -> Result<(), IoError> {
    let mut out = writer(w, &PROFILE_HEADER)?;
    for (i, y) in profile.intensities.iter().enumerate() {
        out.write_record([i.to_string(), num(*y)])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a `pixel_index,intensity` file. Pixel indices must run 0, 1, 2, ….
pub fn read_profile_csv<R: Read>(r: R) -> Result<FringeProfile, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(&mut rdr, &PROFILE_HEADER)?;
    let mut intensities = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let idx: usize = parse_field(&rec, 0, line + 1)?;
        if idx != intensities.len() {
            return Err(IoError::Schema(format!("row {}: pixel index {idx} out of sequence", line + 1)));
        }
        let y: f64 = parse_field(&rec, 1, line + 1)?;
        if !y.is_finite() {
            return Err(IoError::Schema(format!("row {}: non-finite intensity", line + 1)));
        }
        intensities.push(y);
    }
    if intensities.is_empty() {
        return Err(IoError::Schema("profile has no samples".into()));
    }
    Ok(FringeProfile::from_samples(intensities))
}

/// JSON sidecar written next to each profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileMetadata {
    pub detector: DetectorConfig,
    pub truth: Option<FringeModelParams>,
    pub seed: u64,
    pub frame_index: Option<u64>,
    pub theta_deg: Option<f64>,
}

impl ProfileMetadata {
    pub fn for_profile(profile: &FringeProfile, frame_index: Option<u64>, theta_deg: Option<f64>) -> Self {
        Self { detector: profile.detector, truth: profile.truth, seed: profile.detector.seed, frame_index, theta_deg }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<T, IoError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_theory_csv<W: Write>(w: W, rows: &[TheoryRow]) -> Result<(), IoError> {
    let mut out = writer(w, &THEORY_HEADER)?;
    for r in rows {
        out.write_record([
            num(theta_deg(r.theta)),
            num(r.v_with_r),
            num(r.v_without_r),
            num(r.z_abs),
            opt(r.weak_value_abs),
            num(r.overlap),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, stats: &[SweepStatistics]) -> Result<(), IoError> {
    let mut out = writer(w, &SWEEP_HEADER)?;
    for s in stats {
        out.write_record([
            num(theta_deg(s.theta)),
            num(s.visibility_mean),
            num(s.visibility_std),
            s.n_frames.to_string(),
            s.method.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a sweep table back. Failed-frame counts are not stored and read as 0.
pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepStatistics>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(&mut rdr, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let theta_deg: f64 = parse_field(&rec, 0, line + 1)?;
        let visibility_mean: f64 = parse_field(&rec, 1, line + 1)?;
        let method: FitMethod = rec
            .get(4)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e: String| IoError::Schema(format!("row {}: {e}", line + 1)))?;
        out.push(SweepStatistics {
            theta: theta_deg.to_radians(),
            visibility_mean,
            visibility_std: parse_field(&rec, 2, line + 1)?,
            n_frames: parse_field(&rec, 3, line + 1)?,
            n_failed: 0,
            method,
            out_of_range: !(0.0..=1.0).contains(&visibility_mean),
        });
    }
    Ok(out)
}

pub fn write_weakmeas_csv<W: Write>(w: W, rows: &[WeakMeasRow]) -> Result<(), IoError> {
    let mut out = writer(w, &WEAKMEAS_HEADER)?;
    for r in rows {
        out.write_record([
            num(theta_deg(r.theta)),
            num(r.centroid_over_a),
            num(r.weak_value_re_inferred),
            opt(r.weak_value_re_exact),
            num(r.a_over_sigma),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Generic numeric table with a caller-chosen header; `None` cells are empty.
pub fn write_table_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<(), IoError> {
    let mut out = writer(w, header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(IoError::Schema(format!("row has {} cells, header has {}", row.len(), header.len())));
        }
        out.write_record(row.iter().map(|c| opt(*c)))?;
    }
    out.flush()?;
    Ok(())
}
