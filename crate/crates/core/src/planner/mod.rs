//! Provider metadata-request plans and their execution.

mod exec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use exec::{execute_plan, haversine_m, ExecConfig, FixtureAdapter, ProviderAdapter};

use crate::error::{Error, Result};
use crate::geo::{lattice, Bbox, GeoPoint, Point};
use crate::ingest::{Boundary, Provider};
use crate::spatial::KdTree;

pub const GSV_SPACING_M: f64 = 20.0;
pub const GSV_RADIUS_M: f64 = 100.0;
pub const AMS_SPACING_M: f64 = 280.0;
pub const AMS_RADIUS_M: f64 = 200.0;
pub const MLY_TILE_M: f64 = 400.0;

/// One metadata request. Serializes to the plan JSON-lines format.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Query {
    PointRadius {
        lat: f64,
        lon: f64,
        radius_m: f64,
    },
    Tile {
        min_lat: f64,
        min_lon: f64,
        max_lat: f64,
        max_lon: f64,
    },
}

impl Query {
    pub fn point_radius(center: GeoPoint, radius_m: f64) -> Query {
        Query::PointRadius {
            lat: center.lat,
            lon: center.lon,
            radius_m,
        }
    }

    pub fn tile(min: GeoPoint, max: GeoPoint) -> Query {
        Query::Tile {
            min_lat: min.lat,
            min_lon: min.lon,
            max_lat: max.lat,
            max_lon: max.lon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestPlan {
    pub provider: Provider,
    pub queries: Vec<Query>,
}

impl RequestPlan {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            out.push_str(&serde_json::to_string(q).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, provider: Provider) -> Result<RequestPlan> {
        let mut queries = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                let q = serde_json::from_str(trimmed).map_err(|e| match crate::error::json_error(trimmed, &e) {
                    Error::Parse { offset: o, message } => Error::Parse {
                        offset: offset + o,
                        message,
                    },
                    other => other,
                })?;
                queries.push(q);
            }
            offset += line.len();
        }
        Ok(RequestPlan { provider, queries })
    }
}

/// PointRadius queries on a `spacing` lattice clipped to the boundary.
pub fn plan_point_grid(boundary: &Boundary, provider: Provider, spacing: f64, radius: f64) -> Result<RequestPlan> {
    if !(radius > 0.0) {
        return Err(Error::validation(format!(
            "query radius must be positive, got {radius}"
        )));
    }
    let bb = boundary.polygon.bbox();
    let indexed = boundary.polygon.prepare();
    let queries = lattice(bb, spacing)?
        .into_iter()
        .filter(|&p| indexed.contains(p))
        .map(|p| Query::point_radius(boundary.projection.unproject(p), radius))
        .collect();
    Ok(RequestPlan { provider, queries })
}

pub fn plan_gsv(boundary: &Boundary) -> Result<RequestPlan> {
    plan_point_grid(boundary, Provider::Gsv, GSV_SPACING_M, GSV_RADIUS_M)
}

pub fn plan_amsterdam(boundary: &Boundary) -> Result<RequestPlan> {
    plan_point_grid(boundary, Provider::Ams, AMS_SPACING_M, AMS_RADIUS_M)
}

pub fn plan_mapillary(boundary: &Boundary) -> Result<RequestPlan> {
    plan_tiles(boundary, Provider::Mly, MLY_TILE_M)
}

/// Square tiles of side `side` tiling the boundary bbox from its minimum,
/// row-major. Tiles whose overlap with the polygon has zero area are dropped.
pub fn plan_tiles(boundary: &Boundary, provider: Provider, side: f64) -> Result<RequestPlan> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::validation(format!("tile side must be positive, got {side}")));
    }
    let bb = boundary.polygon.bbox();
    let count = |extent: f64| ((extent / side) - 1e-9).ceil().max(1.0) as usize;
    let (nx, ny) = (count(bb.width()), count(bb.height()));
    let min_overlap = side * side * 1e-9;
    let mut queries = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let min = Point::new(bb.min.x + side * i as f64, bb.min.y + side * j as f64);
            let tile = Bbox::new(min, Point::new(min.x + side, min.y + side));
            if boundary.polygon.rect_overlap_area(&tile) > min_overlap {
                let p = &boundary.projection;
                queries.push(Query::tile(p.unproject(tile.min), p.unproject(tile.max)));
            }
        }
    }
    Ok(RequestPlan { provider, queries })
}

/// Depth of the lens where two circles of radius `radius` with centers
/// `distance` apart overlap, measured along the center line.
pub fn overlap_depth(radius: f64, distance: f64) -> f64 {
    2.0 * radius - distance
}

/// Fraction of `samples` uniform points in the boundary that fall inside at
/// least one query footprint (projected-plane distances).
pub fn cover_fraction(plan: &RequestPlan, boundary: &Boundary, samples: usize, seed: u64) -> Result<f64> {
    let proj = &boundary.projection;
    let mut centers = Vec::new();
    let mut radii = Vec::new();
    let mut tiles = Vec::new();
    for q in &plan.queries {
        match *q {
            Query::PointRadius { lat, lon, radius_m } => {
                centers.push(proj.project(GeoPoint { lat, lon })?);
                radii.push(radius_m);
            }
            Query::Tile {
                min_lat,
                min_lon,
                max_lat,
                max_lon,
            } => {
                let a = proj.project(GeoPoint {
                    lat: min_lat,
                    lon: min_lon,
                })?;
                let b = proj.project(GeoPoint {
                    lat: max_lat,
                    lon: max_lon,
                })?;
                tiles.push(Bbox::new(a, b));
            }
        }
    }
    let max_radius = radii.iter().cloned().fold(0.0, f64::max);
    let tree = KdTree::new(&centers);
    let indexed = boundary.polygon.prepare();
    let bb = boundary.polygon.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut drawn = 0usize;
    while drawn < samples {
        let p = Point::new(rng.gen_range(bb.min.x..=bb.max.x), rng.gen_range(bb.min.y..=bb.max.y));
        if !indexed.contains(p) {
            continue;
        }
        drawn += 1;
        let in_circle = || {
            // Candidates are the centers within the largest radius.
            let k = centers.len().min(16);
            tree.knn(p, k, None)
                .into_iter()
                .take_while(|&(_, d2)| d2 <= max_radius * max_radius)
                .any(|(i, d2)| d2 <= radii[i] * radii[i])
        };
        if tiles.iter().any(|t| t.contains(p)) || (!centers.is_empty() && in_circle()) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.max(1) as f64)
}
