use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, NaiveDate};
use log::warn;
use serde::{Deserialize, Serialize};

use super::boundary::Boundary;
use super::road::RoadClass;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, IndexedPolygon, Point, Projection};

/// Malformed-line fraction above which a load is aborted.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provider {
    #[serde(rename = "GSV")]
    Gsv,
    #[serde(rename = "MLY")]
    Mly,
    #[serde(rename = "AMS")]
    Ams,
    #[serde(rename = "Other")]
    Other,
}

impl Provider {
    pub fn parse(s: &str) -> Result<Provider> {
        match s.to_ascii_lowercase().as_str() {
            "gsv" | "google" => Ok(Provider::Gsv),
            "mly" | "mapillary" => Ok(Provider::Mly),
            "ams" | "amsterdam" => Ok(Provider::Ams),
            "other" => Ok(Provider::Other),
            other => Err(Error::validation(format!("unknown provider `{other}`"))),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Provider::Gsv => "GSV",
            Provider::Mly => "MLY",
            Provider::Ams => "AMS",
            Provider::Other => "Other",
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PanoRecord {
    pub id: String,
    pub provider: Provider,
    pub location: GeoPoint,
    pub captured_at: Option<NaiveDate>,
}

#[derive(Serialize, Deserialize)]
struct PanoLine {
    id: String,
    lat: f64,
    lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    captured_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provider: Option<String>,
}

impl PanoRecord {
    /// Parses one JSON-lines record; `default_provider` applies when the line has none.
    pub fn from_json(line: &str, default_provider: Provider) -> Result<PanoRecord> {
        let raw: PanoLine = serde_json::from_str(line).map_err(|e| crate::error::json_error(line, &e))?;
        if raw.id.is_empty() {
            return Err(Error::validation("empty panorama id"));
        }
        let location = GeoPoint::new(raw.lat, raw.lon)?;
        let captured_at = raw.captured_at.as_deref().map(parse_date).transpose()?;
        let provider = match raw.provider.as_deref() {
            Some(p) => Provider::parse(p)?,
            None => default_provider,
        };
        Ok(PanoRecord {
            id: raw.id,
            provider,
            location,
            captured_at,
        })
    }

    pub fn to_json(&self) -> String {
        let line = PanoLine {
            id: self.id.clone(),
            lat: self.location.lat,
            lon: self.location.lon,
            captured_at: self.captured_at.map(|d| d.format("%Y-%m-%d").to_string()),
            provider: Some(self.provider.code().to_string()),
        };
        serde_json::to_string(&line).expect("serializable")
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.naive_utc().date())
        .map_err(|_| Error::validation(format!("invalid captured_at `{s}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LoadStats {
    /// Non-empty input lines.
    pub lines: usize,
    pub outside: usize,
    pub duplicates: usize,
    pub errors: Vec<LineError>,
}

#[derive(Clone, Debug)]
pub struct PanoDataset {
    pub city: String,
    pub provider: Provider,
    pub road_class: Option<RoadClass>,
    pub records: Vec<PanoRecord>,
    pub projection: Projection,
    pub stats: LoadStats,
}

impl PanoDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record locations in the dataset's projection.
    pub fn points(&self) -> Vec<Point<f64>> {
        self.records
            .iter()
            .map(|r| self.projection.project(r.location).expect("validated on load"))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json());
            out.push('\n');
        }
        out
    }
}

/// Collapses repeated ids to their first occurrence. Returns the number removed.
pub fn dedup_by_id(records: &mut Vec<PanoRecord>) -> usize {
    let before = records.len();
    let mut seen = HashSet::with_capacity(records.len());
    records.retain(|r| seen.insert(r.id.clone()));
    before - records.len()
}

/// Keeps records whose projected location lies inside (or on) the boundary.
/// Returns the number dropped.
pub(crate) fn clip_to_boundary(
    records: &mut Vec<PanoRecord>,
    polygon: &IndexedPolygon<f64>,
    projection: &Projection,
) -> usize {
    let before = records.len();
    records.retain(|r| {
        projection
            .project(r.location)
            .map(|p| polygon.contains(p))
            .unwrap_or(false)
    });
    before - records.len()
}

/// Loads a JSON-lines panorama file, dropping records outside `boundary` and
/// duplicate ids. Aborts when more than 1 % of non-empty lines are malformed.
pub fn load_panos(text: &str, boundary: &Boundary, provider: Provider) -> Result<PanoDataset> {
    let mut stats = LoadStats::default();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        stats.lines += 1;
        match PanoRecord::from_json(line, provider) {
            Ok(r) => records.push(r),
            Err(e) => stats.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    if !stats.errors.is_empty() {
        let fraction = stats.errors.len() as f64 / stats.lines as f64;
        if fraction > MAX_MALFORMED_FRACTION {
            let first = &stats.errors[0];
            return Err(Error::validation(format!(
                "{} of {} panorama lines malformed (first at line {}: {})",
                stats.errors.len(),
                stats.lines,
                first.line,
                first.message
            )));
        }
        warn!("{} malformed panorama lines skipped", stats.errors.len());
    }
    let indexed = boundary.polygon.prepare();
    stats.outside = clip_to_boundary(&mut records, &indexed, &boundary.projection);
    stats.duplicates = dedup_by_id(&mut records);
    Ok(PanoDataset {
        city: String::new(),
        provider,
        road_class: None,
        records,
        projection: boundary.projection,
        stats,
    })
}
