//! Metric substrate: projection, polygons, polylines and point lattices.

mod grid;
mod point;
mod polygon;
mod polyline;

pub use grid::{lattice, make_point_grid};
pub use point::{GeoPoint, Point, Projection, EARTH_RADIUS_M, MAX_PROJECTED_ABS};
pub use polygon::{point_in_polygon, Bbox, IndexedPolygon, Polygon};
pub use polyline::{clip_polyline, resample_polyline, Polyline};
