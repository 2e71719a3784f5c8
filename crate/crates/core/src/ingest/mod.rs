//! Parsers for city boundaries, road networks and panorama metadata.

mod boundary;
mod osm;
mod panos;
mod road;

pub use boundary::{parse_boundary, Boundary};
pub use osm::{parse_geojson_roads, parse_osm_roads, parse_roads};
pub(crate) use panos::clip_to_boundary;
pub use panos::{
    dedup_by_id, load_panos, LineError, LoadStats, PanoDataset, PanoRecord, Provider, MAX_MALFORMED_FRACTION,
};
pub use road::{Road, RoadClass, RoadNetwork, RoadParseStats};
