use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{Polygon, Polyline, Projection};

/// Road accessibility class derived from the OSM `highway` tag.
///
/// As a *filter*, `Driveable` admits only car-accessible ways while
/// `PublicOnly` admits every publicly accessible way, driveable ones included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadClass {
    Driveable,
    PublicOnly,
}

const DRIVEABLE: &[&str] = &[
    "motorway",
    "trunk",
    "primary",
    "secondary",
    "tertiary",
    "residential",
    "unclassified",
    "service",
    "living_street",
];

const PUBLIC_EXTRA: &[&str] = &["pedestrian", "footway", "path", "cycleway", "steps", "track"];

impl RoadClass {
    /// Class of a `highway` tag value, or `None` for tags outside both sets.
    pub fn of_highway(tag: &str) -> Option<RoadClass> {
        let base = tag.strip_suffix("_link").unwrap_or(tag);
        let linkable = matches!(base, "motorway" | "trunk" | "primary" | "secondary" | "tertiary");
        if DRIVEABLE.contains(&tag) || (tag != base && linkable) {
            Some(RoadClass::Driveable)
        } else if PUBLIC_EXTRA.contains(&tag) {
            Some(RoadClass::PublicOnly)
        } else {
            None
        }
    }

    /// Whether a road of class `road` passes this filter.
    pub fn admits(self, road: RoadClass) -> bool {
        match self {
            RoadClass::Driveable => road == RoadClass::Driveable,
            RoadClass::PublicOnly => true,
        }
    }

    pub fn parse(s: &str) -> Result<RoadClass> {
        match s.to_ascii_lowercase().as_str() {
            "driveable" | "drivable" | "drive" => Ok(RoadClass::Driveable),
            "public" | "public_only" | "publiconly" | "all" => Ok(RoadClass::PublicOnly),
            other => Err(Error::validation(format!("unknown road class `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RoadClass::Driveable => "driveable",
            RoadClass::PublicOnly => "public",
        }
    }
}

/// One OSM way after clipping; a way leaving and re-entering the boundary
/// keeps a single id with several parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Road {
    pub way_id: i64,
    pub class: RoadClass,
    pub highway: String,
    pub parts: Vec<Polyline<f64>>,
}

impl Road {
    pub fn length(&self) -> f64 {
        self.parts.iter().map(Polyline::length).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RoadParseStats {
    /// Node references that did not resolve to a node.
    pub dangling_refs: usize,
    /// Ways with fewer than two resolvable, distinct nodes.
    pub skipped_ways: usize,
    /// Ways entirely outside the boundary.
    pub outside_ways: usize,
    /// Repeated way ids (first occurrence kept).
    pub duplicate_ids: usize,
    /// Highway-tagged ways rejected by the class filter.
    pub filtered_ways: usize,
}

#[derive(Clone, Debug)]
pub struct RoadNetwork {
    pub roads: Vec<Road>,
    pub boundary: Polygon<f64>,
    pub projection: Projection,
    pub stats: RoadParseStats,
}

impl RoadNetwork {
    pub fn total_length(&self) -> f64 {
        self.roads.iter().map(Road::length).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.roads.is_empty()
    }

    pub fn polylines(&self) -> impl Iterator<Item = &Polyline<f64>> {
        self.roads.iter().flat_map(|r| r.parts.iter())
    }

    /// GeoJSON FeatureCollection of LineStrings (WGS84) with `highway` and `id`.
    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .roads
            .iter()
            .map(|r| {
                let lines: Vec<Vec<[f64; 2]>> = r
                    .parts
                    .iter()
                    .map(|l| {
                        l.points()
                            .iter()
                            .map(|&p| {
                                let g = self.projection.unproject(p);
                                [g.lon, g.lat]
                            })
                            .collect()
                    })
                    .collect();
                let geometry = if lines.len() == 1 {
                    json!({"type": "LineString", "coordinates": lines[0]})
                } else {
                    json!({"type": "MultiLineString", "coordinates": lines})
                };
                json!({
                    "type": "Feature",
                    "id": r.way_id,
                    "properties": {"highway": r.highway},
                    "geometry": geometry,
                })
            })
            .collect();
        serde_json::to_string(&json!({"type": "FeatureCollection", "features": features})).expect("serializable")
    }
}
