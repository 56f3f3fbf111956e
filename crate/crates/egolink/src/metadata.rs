//! Per-camera sensor logs: parsing, validation, and time-interpolated state.
//!
//! Each camera carries a log of GPS/heading/speed samples at integer
//! millisecond timestamps. Association needs the camera state at arbitrary
//! instants (a target's exit time rarely lands on a log row), so
//! [`CameraTrajectory::sample_state`] interpolates: linear for position and
//! speed, shortest-arc for heading.
//!
//! Logs may carry extra sensor channels (accelerometer, gyro, ...). They are
//! parsed and preserved but play no part in the association math.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoError;
use crate::{Bearing, GeoPoint};

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid trajectory: {0}")]
    Validation(String),
    #[error("timestamp {t} ms outside trajectory span [{start}, {end}]")]
    OutOfRange { t: i64, start: i64, end: i64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<GeoError> for MetadataError {
    fn from(e: GeoError) -> Self {
        MetadataError::Validation(e.to_string())
    }
}

/// One row of a camera sensor log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraStateSample {
    pub timestamp_ms: i64,
    pub position: GeoPoint,
    pub heading: Bearing,
    pub speed_mps: f64,
}

/// On-disk log format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogFormat {
    Csv,
    JsonLines,
}

const CORE_FIELDS: [&str; 5] = ["timestamp_ms", "longitude", "latitude", "heading_deg", "speed_mps"];

/// Immutable, time-ordered sensor log for one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrajectory {
    camera_id: String,
    samples: Vec<CameraStateSample>,
    extra_channels: BTreeMap<String, Vec<f64>>,
}

impl CameraTrajectory {
    /// Validates and builds a trajectory. Samples must already be sorted;
    /// use [`parse_camera_log`] for raw input.
    // Negated comparisons reject NaN along with out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        camera_id: impl Into<String>,
        samples: Vec<CameraStateSample>,
        extra_channels: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, MetadataError> {
        if samples.len() < 2 {
            return Err(MetadataError::Validation(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(MetadataError::Validation(format!(
                    "timestamps not strictly increasing at {} ms",
                    pair[1].timestamp_ms
                )));
            }
        }
        for s in &samples {
            if !(s.speed_mps >= 0.0) {
                return Err(MetadataError::Validation(format!(
                    "negative speed {} at {} ms",
                    s.speed_mps, s.timestamp_ms
                )));
            }
        }
        for (name, values) in &extra_channels {
            if values.len() != samples.len() {
                return Err(MetadataError::Validation(format!(
                    "extra channel '{name}' has {} values for {} samples",
                    values.len(),
                    samples.len()
                )));
            }
        }
        Ok(Self { camera_id: camera_id.into(), samples, extra_channels })
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn samples(&self) -> &[CameraStateSample] {
        &self.samples
    }

    pub fn extra_channels(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.extra_channels
    }

    pub fn start_ms(&self) -> i64 {
        self.samples[0].timestamp_ms
    }

    pub fn end_ms(&self) -> i64 {
        self.samples[self.samples.len() - 1].timestamp_ms
    }

    pub fn covers(&self, t: i64) -> bool {
        (self.start_ms()..=self.end_ms()).contains(&t)
    }

    /// Camera state at time `t`, interpolating between log rows.
    ///
    /// Position and speed interpolate linearly; heading follows the shorter
    /// arc between the bracketing samples (ties at exactly 180 degrees apart
    /// resolve clockwise from the earlier sample).
    pub fn sample_state(&self, t: i64) -> Result<CameraStateSample, MetadataError> {
        if !self.covers(t) {
            return Err(MetadataError::OutOfRange {
                t,
                start: self.start_ms(),
                end: self.end_ms(),
            });
        }
        let idx = match self.samples.binary_search_by_key(&t, |s| s.timestamp_ms) {
            Ok(i) => return Ok(self.samples[i]),
            Err(i) => i,
        };
        let lo = &self.samples[idx - 1];
        let hi = &self.samples[idx];
        let frac = (t - lo.timestamp_ms) as f64 / (hi.timestamp_ms - lo.timestamp_ms) as f64;
        let lerp = |a: f64, b: f64| a + (b - a) * frac;
        let position = GeoPoint::new(
            lerp(lo.position.longitude(), hi.position.longitude()),
            lerp(lo.position.latitude(), hi.position.latitude()),
        )?;
        let h1 = lo.heading.degrees();
        let h2 = hi.heading.degrees();
        let mut delta = (h2 - h1).rem_euclid(360.0);
        if delta > 180.0 {
            delta -= 360.0;
        }
        // delta == 180 stays positive: exact opposites resolve clockwise
        let heading = Bearing::new(h1 + delta * frac);
        Ok(CameraStateSample {
            timestamp_ms: t,
            position,
            heading,
            speed_mps: lerp(lo.speed_mps, hi.speed_mps),
        })
    }
}

/// Validation thresholds for [`validate_trajectory`].
#[derive(Debug, Clone, Copy)]
pub struct ValidationThresholds {
    /// Inter-sample gaps above this are reported.
    pub max_gap_ms: i64,
    /// Recorded or GPS-implied speeds above this are reported.
    pub max_speed_mps: f64,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        Self { max_gap_ms: 2_000, max_speed_mps: 15.0 }
    }
}

/// A soft data-quality finding; none of these reject a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    Gap { from_ms: i64, to_ms: i64, gap_ms: i64 },
    SpeedSpike { at_ms: i64, speed_mps: f64 },
    GpsJump { from_ms: i64, to_ms: i64, implied_speed_mps: f64 },
}

/// Scans a trajectory for sampling gaps, speed spikes and GPS jumps.
pub fn validate_trajectory(
    traj: &CameraTrajectory,
    thresholds: &ValidationThresholds,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for s in traj.samples() {
        if s.speed_mps > thresholds.max_speed_mps {
            out.push(Diagnostic::SpeedSpike { at_ms: s.timestamp_ms, speed_mps: s.speed_mps });
        }
    }
    for pair in traj.samples().windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let gap = b.timestamp_ms - a.timestamp_ms;
        if gap > thresholds.max_gap_ms {
            out.push(Diagnostic::Gap { from_ms: a.timestamp_ms, to_ms: b.timestamp_ms, gap_ms: gap });
        }
        let dist = crate::geo::great_circle_distance(a.position, b.position);
        let implied = dist / (gap as f64 / 1000.0);
        if implied > thresholds.max_speed_mps {
            out.push(Diagnostic::GpsJump {
                from_ms: a.timestamp_ms,
                to_ms: b.timestamp_ms,
                implied_speed_mps: implied,
            });
        }
    }
    out
}

/// Parses a camera log in either supported format.
///
/// Rows are sorted by timestamp; duplicate timestamps are rejected.
pub fn parse_camera_log(
    input: impl Read,
    format: LogFormat,
    camera_id: impl Into<String>,
) -> Result<CameraTrajectory, MetadataError> {
    let rows = match format {
        LogFormat::Csv => parse_csv_rows(input)?,
        LogFormat::JsonLines => parse_jsonl_rows(input)?,
    };
    build_trajectory(camera_id, rows)
}

struct RawRow {
    line: usize,
    sample: CameraStateSample,
    extras: Vec<(String, f64)>,
}

fn build_trajectory(
    camera_id: impl Into<String>,
    mut rows: Vec<RawRow>,
) -> Result<CameraTrajectory, MetadataError> {
    rows.sort_by_key(|r| r.sample.timestamp_ms);
    for pair in rows.windows(2) {
        if pair[1].sample.timestamp_ms == pair[0].sample.timestamp_ms {
            return Err(MetadataError::Validation(format!(
                "duplicate timestamp {} ms (lines {} and {})",
                pair[0].sample.timestamp_ms, pair[0].line, pair[1].line
            )));
        }
    }
    let mut extra_channels: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        for (name, value) in &row.extras {
            let channel = extra_channels
                .entry(name.clone())
                .or_insert_with(|| vec![f64::NAN; rows.len()]);
            channel[i] = *value;
        }
    }
    let samples = rows.into_iter().map(|r| r.sample).collect();
    CameraTrajectory::new(camera_id, samples, extra_channels)
}

// Negated comparisons reject NaN along with out-of-range values.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn row_from_fields(
    line: usize,
    timestamp_ms: i64,
    longitude: f64,
    latitude: f64,
    heading_deg: f64,
    speed_mps: f64,
    extras: Vec<(String, f64)>,
) -> Result<RawRow, MetadataError> {
    let position = GeoPoint::new(longitude, latitude)
        .map_err(|e| MetadataError::Parse { line, message: e.to_string() })?;
    if !(speed_mps >= 0.0) {
        return Err(MetadataError::Parse {
            line,
            message: format!("negative speed {speed_mps}"),
        });
    }
    Ok(RawRow {
        line,
        sample: CameraStateSample {
            timestamp_ms,
            position,
            heading: Bearing::new(heading_deg),
            speed_mps,
        },
        extras,
    })
}

fn parse_csv_rows(input: impl Read) -> Result<Vec<RawRow>, MetadataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| MetadataError::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.len() < CORE_FIELDS.len() || headers[..CORE_FIELDS.len()] != CORE_FIELDS {
        return Err(MetadataError::Parse {
            line: 1,
            message: format!(
                "header must start with '{}', got '{}'",
                CORE_FIELDS.join(","),
                headers.join(",")
            ),
        });
    }
    let extra_names = headers[CORE_FIELDS.len()..].to_vec();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| MetadataError::Parse { line, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(MetadataError::Parse {
                line,
                message: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let field = |idx: usize| -> Result<f64, MetadataError> {
            record[idx].parse::<f64>().map_err(|e| MetadataError::Parse {
                line,
                message: format!("field '{}': {e}", headers[idx]),
            })
        };
        let timestamp_ms = record[0].parse::<i64>().map_err(|e| MetadataError::Parse {
            line,
            message: format!("field 'timestamp_ms': {e}"),
        })?;
        let mut extras = Vec::with_capacity(extra_names.len());
        for (j, name) in extra_names.iter().enumerate() {
            extras.push((name.clone(), field(CORE_FIELDS.len() + j)?));
        }
        rows.push(row_from_fields(
            line,
            timestamp_ms,
            field(1)?,
            field(2)?,
            field(3)?,
            field(4)?,
            extras,
        )?);
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct JsonRow {
    timestamp_ms: i64,
    longitude: f64,
    latitude: f64,
    heading_deg: f64,
    speed_mps: f64,
    #[serde(flatten)]
    extras: BTreeMap<String, serde_json::Value>,
}

fn parse_jsonl_rows(input: impl Read) -> Result<Vec<RawRow>, MetadataError> {
    let mut rows = Vec::new();
    for (i, line_result) in BufReader::new(input).lines().enumerate() {
        let line = i + 1;
        let text = line_result?;
        if text.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&text)
            .map_err(|e| MetadataError::Parse { line, message: e.to_string() })?;
        let mut extras = Vec::new();
        for (name, value) in row.extras {
            let v = value.as_f64().ok_or_else(|| MetadataError::Parse {
                line,
                message: format!("extra channel '{name}' is not numeric"),
            })?;
            extras.push((name, v));
        }
        rows.push(row_from_fields(
            line,
            row.timestamp_ms,
            row.longitude,
            row.latitude,
            row.heading_deg,
            row.speed_mps,
            extras,
        )?);
    }
    Ok(rows)
}

/// Writes a trajectory back out in the given format.
pub fn write_camera_log(
    traj: &CameraTrajectory,
    mut out: impl Write,
    format: LogFormat,
) -> Result<(), MetadataError> {
    match format {
        LogFormat::Csv => {
            let mut header: Vec<&str> = CORE_FIELDS.to_vec();
            let extra_names: Vec<&String> = traj.extra_channels.keys().collect();
            header.extend(extra_names.iter().map(|s| s.as_str()));
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&header).map_err(io_like)?;
            for (i, s) in traj.samples.iter().enumerate() {
                let mut record = vec![
                    s.timestamp_ms.to_string(),
                    fmt_f64(s.position.longitude()),
                    fmt_f64(s.position.latitude()),
                    fmt_f64(s.heading.degrees()),
                    fmt_f64(s.speed_mps),
                ];
                for name in &extra_names {
                    record.push(fmt_f64(traj.extra_channels[*name][i]));
                }
                w.write_record(&record).map_err(io_like)?;
            }
            w.flush()?;
        }
        LogFormat::JsonLines => {
            for (i, s) in traj.samples.iter().enumerate() {
                let mut obj = serde_json::Map::new();
                obj.insert("timestamp_ms".into(), s.timestamp_ms.into());
                obj.insert("longitude".into(), json_f64(s.position.longitude()));
                obj.insert("latitude".into(), json_f64(s.position.latitude()));
                obj.insert("heading_deg".into(), json_f64(s.heading.degrees()));
                obj.insert("speed_mps".into(), json_f64(s.speed_mps));
                for (name, values) in &traj.extra_channels {
                    obj.insert(name.clone(), json_f64(values[i]));
                }
                serde_json::to_writer(&mut out, &serde_json::Value::Object(obj))
                    .map_err(|e| MetadataError::Validation(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn io_like(e: csv::Error) -> MetadataError {
    MetadataError::Validation(e.to_string())
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trippable decimal form, so parse(write(x)) == x.
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    format!("{v:?}")
}

fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
}
