use std::collections::{HashMap, HashSet};

use log::warn;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde_json::Value;

use super::boundary::{parse_positions, Boundary};
use super::road::{Road, RoadClass, RoadNetwork, RoadParseStats};
use crate::error::{json_error, Error, Result};
use crate::geo::{clip_polyline, GeoPoint, Polyline};

struct RawWay {
    id: i64,
    highway: String,
    coords: Vec<GeoPoint>,
}

/// Parses an OSM XML extract (node/way/tag subset) into a clipped road network.
pub fn parse_osm_roads(xml: &str, boundary: &Boundary, filter: RoadClass) -> Result<RoadNetwork> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);

    let mut nodes: HashMap<i64, GeoPoint> = HashMap::new();
    // (id, refs, highway)
    let mut ways: Vec<(i64, Vec<i64>, Option<String>)> = Vec::new();
    let mut in_way = false;
    let mut depth = 0usize;
    let err = |reader: &Reader<&[u8]>, msg: String| Error::parse(reader.error_position() as usize, msg);

    loop {
        let ev = reader.read_event().map_err(|e| err(&reader, e.to_string()))?;
        match ev {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_start = matches!(ev, Event::Start(_));
                match e.name().as_ref() {
                    b"node" => {
                        let id = attr_i64(e, b"id")?;
                        let lat = attr_f64(e, b"lat")?;
                        let lon = attr_f64(e, b"lon")?;
                        nodes.insert(id, GeoPoint::new(lat, lon)?);
                    }
                    b"way" => {
                        ways.push((attr_i64(e, b"id")?, Vec::new(), None));
                        in_way = is_start;
                    }
                    b"nd" if in_way => {
                        let r = attr_i64(e, b"ref")?;
                        ways.last_mut().expect("inside way").1.push(r);
                    }
                    b"tag" if in_way => {
                        if attr_str(e, b"k")?.as_deref() == Some("highway") {
                            ways.last_mut().expect("inside way").2 = attr_str(e, b"v")?;
                        }
                    }
                    _ => {}
                }
                if is_start {
                    depth += 1;
                }
            }
            Event::End(ref e) => {
                if e.name().as_ref() == b"way" {
                    in_way = false;
                }
                depth = depth.saturating_sub(1);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::parse(xml.len(), "unexpected end of XML: unclosed elements"));
    }

    let mut stats = RoadParseStats::default();
    let mut raw = Vec::new();
    for (id, refs, highway) in ways {
        let Some(highway) = highway else { continue };
        let mut coords = Vec::with_capacity(refs.len());
        for r in refs {
            match nodes.get(&r) {
                Some(&g) => coords.push(g),
                None => stats.dangling_refs += 1,
            }
        }
        raw.push(RawWay { id, highway, coords });
    }
    if stats.dangling_refs > 0 {
        warn!("{} dangling node references dropped", stats.dangling_refs);
    }
    assemble(raw, boundary, filter, stats)
}

/// Parses a GeoJSON FeatureCollection of LineString/MultiLineString features
/// carrying a `highway` property.
pub fn parse_geojson_roads(text: &str, boundary: &Boundary, filter: RoadClass) -> Result<RoadNetwork> {
    let root: Value = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Type("road GeoJSON must be a FeatureCollection".into()))?;
    let mut raw = Vec::new();
    for (idx, f) in features.iter().enumerate() {
        let props = f.get("properties");
        let Some(highway) = props.and_then(|p| p.get("highway")).and_then(Value::as_str) else {
            continue;
        };
        let id = f
            .get("id")
            .and_then(Value::as_i64)
            .or_else(|| props.and_then(|p| p.get("osm_id")).and_then(Value::as_i64))
            .or_else(|| props.and_then(|p| p.get("id")).and_then(Value::as_i64))
            .unwrap_or(idx as i64);
        let Some(geom) = f.get("geometry").filter(|g| !g.is_null()) else {
            continue;
        };
        let lines: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
            Some("LineString") => geom.get("coordinates").into_iter().collect(),
            Some("MultiLineString") => geom
                .get("coordinates")
                .and_then(Value::as_array)
                .map(|a| a.iter().collect())
                .unwrap_or_default(),
            _ => continue,
        };
        for line in lines {
            let coords = parse_positions(line)?
                .into_iter()
                .map(|p| GeoPoint { lat: p.y, lon: p.x })
                .collect();
            raw.push(RawWay {
                id,
                highway: highway.to_string(),
                coords,
            });
        }
    }
    // MultiLineString members share an id; merge them back into one road.
    assemble(raw, boundary, filter, RoadParseStats::default())
}

/// Dispatches on content: XML (`<`) goes to the OSM parser, anything else to GeoJSON.
pub fn parse_roads(text: &str, boundary: &Boundary, filter: RoadClass) -> Result<RoadNetwork> {
    if text.trim_start().starts_with('<') {
        parse_osm_roads(text, boundary, filter)
    } else {
        parse_geojson_roads(text, boundary, filter)
    }
}

fn assemble(
    raw: Vec<RawWay>,
    boundary: &Boundary,
    filter: RoadClass,
    mut stats: RoadParseStats,
) -> Result<RoadNetwork> {
    let indexed = boundary.polygon.prepare();
    let mut roads: Vec<Road> = Vec::new();
    let mut slot: HashMap<i64, usize> = HashMap::new();
    let mut seen_ids: HashSet<i64> = HashSet::new();
    let mut last_id = None;
    for way in raw {
        // Consecutive pieces with the same id come from one MultiLineString.
        let continuing = last_id == Some(way.id);
        if !continuing && !seen_ids.insert(way.id) {
            stats.duplicate_ids += 1;
            continue;
        }
        last_id = Some(way.id);
        let Some(class) = RoadClass::of_highway(&way.highway) else {
            continue;
        };
        if !filter.admits(class) {
            stats.filtered_ways += 1;
            continue;
        }
        let projected = way
            .coords
            .iter()
            .map(|&g| boundary.projection.project(g))
            .collect::<Result<Vec<_>>>()?;
        let Ok(line) = Polyline::new(projected) else {
            stats.skipped_ways += 1;
            continue;
        };
        let parts = clip_polyline(&line, &indexed);
        if parts.is_empty() {
            if !continuing {
                stats.outside_ways += 1;
            }
            continue;
        }
        match slot.get(&way.id) {
            Some(&i) => roads[i].parts.extend(parts),
            None => {
                slot.insert(way.id, roads.len());
                roads.push(Road {
                    way_id: way.id,
                    class,
                    highway: way.highway,
                    parts,
                });
            }
        }
    }
    Ok(RoadNetwork {
        roads,
        boundary: boundary.polygon.clone(),
        projection: boundary.projection,
        stats,
    })
}

fn attr_str(e: &BytesStart, key: &[u8]) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::parse(0, err.to_string()))?;
        if a.key.as_ref() == key {
            let v = a.unescape_value().map_err(|err| Error::parse(0, err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart, key: &[u8]) -> Result<String> {
    attr_str(e, key)?.ok_or_else(|| {
        Error::parse(
            0,
            format!(
                "<{}> missing attribute `{}`",
                String::from_utf8_lossy(e.name().as_ref()),
                String::from_utf8_lossy(key)
            ),
        )
    })
}

fn attr_i64(e: &BytesStart, key: &[u8]) -> Result<i64> {
    let s = required(e, key)?;
    s.parse().map_err(|_| Error::parse(0, format!("invalid integer `{s}`")))
}

fn attr_f64(e: &BytesStart, key: &[u8]) -> Result<f64> {
    let s = required(e, key)?;
    s.parse().map_err(|_| Error::parse(0, format!("invalid number `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_boundary;

    // 0.01 deg square around (52.0, 4.0).
    fn boundary() -> Boundary {
        parse_boundary(
            r#"{"type":"Polygon","coordinates":[[[3.995,51.995],[4.005,51.995],[4.005,52.005],[3.995,52.005],[3.995,51.995]]]}"#,
        )
        .unwrap()
    }

    fn osm(highway: &str) -> String {
        format!(
            r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="52.000" lon="3.999"/>
  <node id="2" lat="52.000" lon="4.000"/>
  <node id="3" lat="52.001" lon="4.000"/>
  <way id="10">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/>
    <tag k="highway" v="{highway}"/>
    <tag k="name" v="Test &amp; Street"/>
  </way>
</osm>"#
        )
    }

    #[test]
    fn residential_way_becomes_driveable_road() {
        let net = parse_osm_roads(&osm("residential"), &boundary(), RoadClass::Driveable).unwrap();
        assert_eq!(net.roads.len(), 1);
        assert_eq!(net.roads[0].class, RoadClass::Driveable);
        assert_eq!(net.roads[0].way_id, 10);
        assert_eq!(net.roads[0].parts[0].points().len(), 3);
    }

    #[test]
    fn footway_only_in_public_network() {
        let b = boundary();
        assert_eq!(
            parse_osm_roads(&osm("footway"), &b, RoadClass::Driveable)
                .unwrap()
                .roads
                .len(),
            0
        );
        assert_eq!(
            parse_osm_roads(&osm("footway"), &b, RoadClass::PublicOnly)
                .unwrap()
                .roads
                .len(),
            1
        );
    }

    #[test]
    fn way_leaving_boundary_is_clipped_at_crossing() {
        let b = boundary();
        let xml = r#"<osm>
  <node id="1" lat="52.000" lon="4.000"/>
  <node id="2" lat="52.000" lon="4.010"/>
  <way id="5"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way>
</osm>"#;
        let net = parse_osm_roads(xml, &b, RoadClass::Driveable).unwrap();
        let line = &net.roads[0].parts[0];
        // Hand computation: crossing at lon 4.005, i.e. 0.005 deg east of the origin.
        let expected_x = crate::geo::EARTH_RADIUS_M * 0.005f64.to_radians() * 52.0f64.to_radians().cos();
        assert!((line.end().x - expected_x).abs() < 1.0, "{:?}", line.end());
        assert!(line.start().x.abs() < 1e-6);
    }

    #[test]
    fn dangling_refs_and_empty_ways_counted() {
        let xml = r#"<osm>
  <node id="1" lat="52.000" lon="4.000"/>
  <node id="2" lat="52.001" lon="4.000"/>
  <way id="5"><nd ref="1"/><nd ref="99"/><nd ref="2"/><tag k="highway" v="service"/></way>
  <way id="6"><nd ref="98"/><nd ref="97"/><tag k="highway" v="service"/></way>
</osm>"#;
        let net = parse_osm_roads(xml, &boundary(), RoadClass::Driveable).unwrap();
        assert_eq!(net.roads.len(), 1);
        assert_eq!(net.stats.dangling_refs, 3);
        assert_eq!(net.stats.skipped_ways, 1);
    }

    #[test]
    fn malformed_xml_is_a_parse_error() {
        let xml = r#"<osm><node id="1" lat="52" lon="4"></way></osm>"#;
        assert!(matches!(
            parse_osm_roads(xml, &boundary(), RoadClass::Driveable),
            Err(Error::Parse { .. })
        ));
        let truncated = r#"<osm><way id="1"><nd ref="1"/>"#;
        assert!(parse_osm_roads(truncated, &boundary(), RoadClass::Driveable).is_err());
    }

    #[test]
    fn node_order_does_not_change_length() {
        let b = boundary();
        let a = osm("residential");
        let reordered = r#"<osm>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/></way>
  <node id="3" lat="52.001" lon="4.000"/>
  <node id="1" lat="52.000" lon="3.999"/>
  <node id="2" lat="52.000" lon="4.000"/>
</osm>"#;
        let l1 = parse_osm_roads(&a, &b, RoadClass::Driveable).unwrap().total_length();
        let l2 = parse_osm_roads(reordered, &b, RoadClass::Driveable)
            .unwrap()
            .total_length();
        assert_eq!(l1, l2);
    }

    #[test]
    fn geojson_roads_round_trip() {
        let b = boundary();
        let net = parse_osm_roads(&osm("residential"), &b, RoadClass::PublicOnly).unwrap();
        let again = parse_geojson_roads(&net.to_geojson(), &b, RoadClass::PublicOnly).unwrap();
        assert_eq!(again.roads.len(), 1);
        assert_eq!(again.roads[0].way_id, 10);
        assert!((again.total_length() - net.total_length()).abs() < 1e-6);
        let via_dispatch = parse_roads(&net.to_geojson(), &b, RoadClass::Driveable).unwrap();
        assert_eq!(via_dispatch.roads.len(), 1);
    }
}
