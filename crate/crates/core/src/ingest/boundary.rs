use serde_json::{json, Value};

use crate::error::{json_error, Error, Result};
use crate::geo::{GeoPoint, Point, Polygon, Projection};

/// A city boundary in projected meters together with its projection.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub polygon: Polygon<f64>,
    pub projection: Projection,
}

impl Boundary {
    /// Boundary polygon as a GeoJSON Feature in WGS84.
    pub fn to_geojson(&self) -> String {
        let ring = |r: &[Point<f64>]| -> Vec<[f64; 2]> {
            r.iter()
                .map(|&p| {
                    let g = self.projection.unproject(p);
                    [g.lon, g.lat]
                })
                .collect()
        };
        let rings: Vec<_> = self.polygon.rings().map(ring).collect();
        serde_json::to_string(&json!({
            "type": "Feature",
            "properties": {},
            "geometry": {"type": "Polygon", "coordinates": rings},
        }))
        .expect("serializable")
    }
}

type DegRing = Vec<Point<f64>>;

/// Parses a GeoJSON Polygon/MultiPolygon (bare geometry, Feature or
/// FeatureCollection). The largest-area polygon is kept and projected about
/// its own area centroid.
pub fn parse_boundary(text: &str) -> Result<Boundary> {
    let root: Value = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
    let mut candidates: Vec<Vec<DegRing>> = Vec::new();
    collect_polygons(&root, &mut candidates)?;
    if candidates.is_empty() {
        return Err(Error::Type("GeoJSON contains no Polygon or MultiPolygon".into()));
    }

    let approx_area = |rings: &Vec<DegRing>| -> f64 {
        let ext = &rings[0];
        let mean_lat = ext.iter().map(|p| p.y).sum::<f64>() / ext.len() as f64;
        let mut a = 0.0;
        for i in 0..ext.len() {
            let (p, q) = (ext[i], ext[(i + 1) % ext.len()]);
            a += p.x * q.y - q.x * p.y;
        }
        (a * 0.5).abs() * mean_lat.to_radians().cos()
    };
    let rings = candidates
        .into_iter()
        .max_by(|a, b| approx_area(a).total_cmp(&approx_area(b)))
        .expect("non-empty");

    let deg_poly = Polygon::new(rings[0].clone(), vec![])?;
    let c = deg_poly.centroid();
    let projection = Projection::new(GeoPoint::new(c.y, c.x)?)?;
    let project_ring = |r: &DegRing| -> Result<Vec<Point<f64>>> {
        r.iter().map(|p| projection.project(GeoPoint::new(p.y, p.x)?)).collect()
    };
    let exterior = project_ring(&rings[0])?;
    let holes = rings[1..].iter().map(project_ring).collect::<Result<Vec<_>>>()?;
    Ok(Boundary {
        polygon: Polygon::new(exterior, holes)?,
        projection,
    })
}

fn collect_polygons(v: &Value, out: &mut Vec<Vec<DegRing>>) -> Result<()> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Type("GeoJSON object without `type`".into()))?;
    match kind {
        "FeatureCollection" => {
            let features = v
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Type("FeatureCollection without `features`".into()))?;
            for f in features {
                collect_polygons(f, out)?;
            }
            Ok(())
        }
        "Feature" => match v.get("geometry") {
            Some(g) if !g.is_null() => collect_polygons(g, out),
            _ => Err(Error::Type("Feature without geometry".into())),
        },
        "Polygon" => {
            out.push(parse_rings(coords(v)?)?);
            Ok(())
        }
        "MultiPolygon" => {
            let polys = coords(v)?
                .as_array()
                .ok_or_else(|| Error::Type("MultiPolygon coordinates must be an array".into()))?;
            for p in polys {
                out.push(parse_rings(p)?);
            }
            Ok(())
        }
        other => Err(Error::Type(format!(
            "expected Polygon or MultiPolygon geometry, found {other}"
        ))),
    }
}

fn coords(v: &Value) -> Result<&Value> {
    v.get("coordinates")
        .ok_or_else(|| Error::Type("geometry without `coordinates`".into()))
}

fn parse_rings(v: &Value) -> Result<Vec<DegRing>> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| Error::Type("polygon needs at least one ring".into()))?;
    rings.iter().map(parse_positions).collect()
}

pub(crate) fn parse_positions(v: &Value) -> Result<Vec<Point<f64>>> {
    v.as_array()
        .ok_or_else(|| Error::Type("expected an array of positions".into()))?
        .iter()
        .map(|pos| {
            let lon = pos.get(0).and_then(Value::as_f64);
            let lat = pos.get(1).and_then(Value::as_f64);
            match (lon, lat) {
                (Some(lon), Some(lat)) => {
                    GeoPoint::new(lat, lon)?;
                    Ok(Point::new(lon, lat))
                }
                _ => Err(Error::Type(format!("invalid position {pos}"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> String {
        format!(
            "[[[{x0},{y0}],[{x1},{y0}],[{x1},{y1}],[{x0},{y1}],[{x0},{y0}]]]",
            x1 = x0 + s,
            y1 = y0 + s
        )
    }

    #[test]
    fn unit_degree_square_at_equator() {
        let text = format!(r#"{{"type":"Polygon","coordinates":{}}}"#, square(0.0, 0.0, 1.0));
        let b = parse_boundary(&text).unwrap();
        assert_eq!(b.polygon.exterior().len(), 5);
        let expected = 111_194.9_f64.powi(2);
        assert!(
            (b.polygon.area() / expected - 1.0).abs() < 0.005,
            "{}",
            b.polygon.area()
        );
        assert!((b.projection.origin.lat - 0.5).abs() < 1e-9);
        assert!((b.projection.origin.lon - 0.5).abs() < 1e-9);
    }

    #[test]
    fn multipolygon_picks_largest() {
        let text = format!(
            r#"{{"type":"Feature","properties":{{}},"geometry":{{"type":"MultiPolygon","coordinates":[{},{}]}}}}"#,
            square(10.0, 10.0, 0.01),
            square(10.5, 10.0, 0.02)
        );
        let b = parse_boundary(&text).unwrap();
        assert!((b.projection.origin.lon - 10.51).abs() < 1e-9);
        let small = 0.01f64.to_radians().powi(2) * crate::geo::EARTH_RADIUS_M.powi(2);
        let ratio = b.polygon.area() / (small * 10.01f64.to_radians().cos());
        assert!((ratio - 4.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn truncated_json_is_a_parse_error() {
        let text = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0]"#;
        match parse_boundary(text) {
            Err(Error::Parse { offset, .. }) => assert!(offset <= text.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_polygon_is_a_type_error() {
        let text = r#"{"type":"LineString","coordinates":[[0,0],[1,1]]}"#;
        assert!(matches!(parse_boundary(text), Err(Error::Type(_))));
    }

    #[test]
    fn geojson_round_trip() {
        let text = format!(r#"{{"type":"Polygon","coordinates":{}}}"#, square(4.8, 52.3, 0.05));
        let b = parse_boundary(&text).unwrap();
        let again = parse_boundary(&b.to_geojson()).unwrap();
        assert!((again.polygon.area() - b.polygon.area()).abs() < 1e-3);
    }
}
