use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::density::{DensityField, FieldKind};
use crate::error::{json_error, Error, Result};
use crate::geo::{Point, Polygon, Projection};

/// One exported grid cell: closed WGS84 ring as `[lon, lat]` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaCell {
    pub i: usize,
    pub j: usize,
    pub ring: Vec<[f64; 2]>,
    pub c_delta: f64,
}

#[derive(Serialize, Deserialize)]
struct FeatureCollectionJson {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<FeatureJson>,
}

#[derive(Serialize, Deserialize)]
struct FeatureJson {
    #[serde(rename = "type")]
    kind: String,
    geometry: GeometryJson,
    properties: CellProps,
}

#[derive(Serialize, Deserialize)]
struct GeometryJson {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct CellProps {
    c_delta: f64,
    i: usize,
    j: usize,
}

/// Difference field as a FeatureCollection of cell polygons with a `c_delta`
/// property. Cells without positive-area overlap with `boundary` are dropped.
pub fn export_delta_geojson(
    field: &DensityField<f64>,
    proj: &Projection,
    boundary: Option<&Polygon<f64>>,
) -> Result<String> {
    if field.kind != FieldKind::Delta {
        return Err(Error::validation(format!(
            "expected a delta field, got {:?}",
            field.kind
        )));
    }
    let g = &field.grid;
    let mut cells = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let b = g.cell_bbox(i, j);
            if let Some(poly) = boundary {
                if !(poly.rect_overlap_area(&b) > 0.0) {
                    continue;
                }
            }
            let corners = [
                b.min,
                Point::new(b.max.x, b.min.y),
                b.max,
                Point::new(b.min.x, b.max.y),
                b.min,
            ];
            let ring = corners
                .iter()
                .map(|&c| {
                    let p = proj.unproject(c);
                    [p.lon, p.lat]
                })
                .collect();
            cells.push(DeltaCell {
                i,
                j,
                ring,
                c_delta: field.value(i, j),
            });
        }
    }
    Ok(cells_to_geojson(&cells))
}

pub fn cells_to_geojson(cells: &[DeltaCell]) -> String {
    let body = FeatureCollectionJson {
        kind: "FeatureCollection".into(),
        features: cells
            .iter()
            .map(|c| FeatureJson {
                kind: "Feature".into(),
                geometry: GeometryJson {
                    kind: "Polygon".into(),
                    coordinates: vec![c.ring.clone()],
                },
                properties: CellProps {
                    c_delta: c.c_delta,
                    i: c.i,
                    j: c.j,
                },
            })
            .collect(),
    };
    serde_json::to_string(&body).expect("serializable")
}

pub fn parse_delta_geojson(text: &str) -> Result<Vec<DeltaCell>> {
    let body: FeatureCollectionJson = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
    if body.kind != "FeatureCollection" {
        return Err(Error::Type(format!("expected FeatureCollection, got {}", body.kind)));
    }
    body.features
        .into_iter()
        .map(|f| {
            if f.geometry.kind != "Polygon" || f.geometry.coordinates.len() != 1 {
                return Err(Error::Type(format!(
                    "cell ({}, {}) is not a single-ring Polygon",
                    f.properties.i, f.properties.j
                )));
            }
            Ok(DeltaCell {
                i: f.properties.i,
                j: f.properties.j,
                ring: f.geometry.coordinates.into_iter().next().unwrap_or_default(),
                c_delta: f.properties.c_delta,
            })
        })
        .collect()
}

/// Midpoint color of the diverging ramp.
pub const NEUTRAL: [u8; 3] = [0xf7, 0xf7, 0xf7];
/// Ramp end for the largest positive value.
pub const RAMP_POSITIVE: [u8; 3] = [0xb2, 0x18, 0x2b];
/// Ramp end for the most negative value.
pub const RAMP_NEGATIVE: [u8; 3] = [0x21, 0x66, 0xac];

/// Color at `t ∈ [-1, 1]`; `t = 0` is [`NEUTRAL`].
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let end = if t >= 0.0 { RAMP_POSITIVE } else { RAMP_NEGATIVE };
    let a = t.abs();
    let mix = |k: usize| (NEUTRAL[k] as f64 + (end[k] as f64 - NEUTRAL[k] as f64) * a).round() as u8;
    [mix(0), mix(1), mix(2)]
}

pub fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

const MAP_PX: f64 = 640.0;
const LEGEND_PX: f64 = 60.0;
const LEGEND_STEPS: usize = 21;

/// Grid choropleth with north up. Delta fields use a ramp symmetric about 0
/// anchored at the largest `|value|`; other fields run from neutral at 0 to
/// the positive end at their maximum.
pub fn export_svg_choropleth(field: &DensityField<f64>) -> Result<String> {
    let g = &field.grid;
    if field.values.len() != g.len() {
        return Err(Error::validation(format!(
            "field has {} values for {} cells",
            field.values.len(),
            g.len()
        )));
    }
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("field has non-finite values"));
    }
    let diverging = field.kind == FieldKind::Delta;
    let anchor = if diverging {
        field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        field.values.iter().fold(0.0f64, |m, &v| m.max(v))
    };
    let t_of = |v: f64| if anchor > 0.0 { v / anchor } else { 0.0 };
    let px = MAP_PX / g.nx.max(g.ny) as f64;
    let (w, h) = (px * g.nx as f64, px * g.ny as f64);
    let total_h = h + LEGEND_PX;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{total_h:.3}" viewBox="0 0 {w:.3} {total_h:.3}">"#
    );
    let _ = writeln!(out, r#"<g class="cells" shape-rendering="crispEdges">"#);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let x = i as f64 * px;
            let y = (g.ny - 1 - j) as f64 * px;
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{x:.3}" y="{y:.3}" width="{px:.3}" height="{px:.3}" fill="{}"/>"#,
                hex(ramp_color(t_of(field.value(i, j))))
            );
        }
    }
    out.push_str("</g>\n<g class=\"legend\" font-family=\"sans-serif\" font-size=\"10\">\n");
    let (lo_t, hi_t) = if diverging { (-1.0, 1.0) } else { (0.0, 1.0) };
    let bar_w = w.min(MAP_PX) * 0.8;
    let bar_x = (w - bar_w) / 2.0;
    let step_w = bar_w / LEGEND_STEPS as f64;
    for k in 0..LEGEND_STEPS {
        let t = lo_t + (hi_t - lo_t) * (k as f64 + 0.5) / LEGEND_STEPS as f64;
        let _ = writeln!(
            out,
            r#"<rect class="swatch" x="{:.3}" y="{:.3}" width="{step_w:.3}" height="12" fill="{}"/>"#,
            bar_x + k as f64 * step_w,
            h + 10.0,
            hex(ramp_color(if anchor > 0.0 { t } else { 0.0 }))
        );
    }
    for (t, v) in legend_ticks(anchor, diverging) {
        let x = bar_x + bar_w * (t - lo_t) / (hi_t - lo_t);
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{x:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            h + 36.0,
            tick_label(v)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// `(ramp position, value)` pairs; a single 0 tick when the field is flat zero.
fn legend_ticks(anchor: f64, diverging: bool) -> Vec<(f64, f64)> {
    if !(anchor > 0.0) {
        return vec![(if diverging { 0.0 } else { 0.5 }, 0.0)];
    }
    let ts: &[f64] = if diverging {
        &[-1.0, -0.5, 0.0, 0.5, 1.0]
    } else {
        &[0.0, 0.25, 0.5, 0.75, 1.0]
    };
    ts.iter().map(|&t| (t, t * anchor)).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.2e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GridSpec;
    use crate::geo::GeoPoint;

    fn delta(nx: usize, ny: usize, cell: f64, values: Vec<f64>) -> DensityField<f64> {
        DensityField {
            grid: GridSpec::new(
                Point::new(-(nx as f64) * cell / 2.0, -(ny as f64) * cell / 2.0),
                cell,
                nx,
                ny,
            )
            .unwrap(),
            values,
            kind: FieldKind::Delta,
            bandwidth: Some(200.0),
        }
    }

    fn proj() -> Projection {
        Projection::new(GeoPoint { lat: 52.37, lon: 4.89 }).unwrap()
    }

    fn cell_fills(svg: &str) -> Vec<&str> {
        svg.lines()
            .filter(|l| l.starts_with("<rect class=\"cell\""))
            .map(|l| {
                let at = l.find("fill=\"").unwrap() + 6;
                &l[at..at + 7]
            })
            .collect()
    }

    #[test]
    fn zero_field_all_cells() {
        let f = delta(2, 2, 1000.0, vec![0.0; 4]);
        let boundary = Polygon::rect(Point::new(-1000.0, -1000.0), Point::new(1000.0, 1000.0)).unwrap();
        let cells = parse_delta_geojson(&export_delta_geojson(&f, &proj(), Some(&boundary)).unwrap()).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.c_delta == 0.0 && c.ring.len() == 5));
    }

    #[test]
    fn outside_cells_dropped() {
        let f = delta(3, 1, 100.0, vec![1.0, 2.0, 3.0]);
        // Covers the first cell and part of the second; touches nothing of the third.
        let boundary = Polygon::rect(Point::new(-150.0, -50.0), Point::new(-20.0, 50.0)).unwrap();
        let cells = parse_delta_geojson(&export_delta_geojson(&f, &proj(), Some(&boundary)).unwrap()).unwrap();
        assert_eq!(
            cells.iter().map(|c| (c.i, c.c_delta)).collect::<Vec<_>>(),
            [(0, 1.0), (1, 2.0)]
        );
        // Edge contact alone is not overlap.
        let edge = Polygon::rect(Point::new(-150.0, -50.0), Point::new(-50.0, 50.0)).unwrap();
        assert_eq!(
            parse_delta_geojson(&export_delta_geojson(&f, &proj(), Some(&edge)).unwrap())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn kind_checked() {
        let mut f = delta(1, 1, 10.0, vec![0.0]);
        f.kind = FieldKind::Real;
        assert!(matches!(
            export_delta_geojson(&f, &proj(), None),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn geojson_round_trip() {
        let values: Vec<f64> = (0..35).map(|k| (k as f64 - 17.0) * 1.37e-7).collect();
        let f = delta(7, 5, 1000.0, values);
        let p = proj();
        let text = export_delta_geojson(&f, &p, None).unwrap();
        let cells = parse_delta_geojson(&text).unwrap();
        assert_eq!(cells_to_geojson(&cells), text);
        assert_eq!(cells.len(), 35);
        for c in &cells {
            let mut sum = Point::new(0.0, 0.0);
            for v in &c.ring[..4] {
                sum = sum + p.project(GeoPoint { lat: v[1], lon: v[0] }).unwrap();
            }
            let center = sum * 0.25;
            assert!(center.dist(f.grid.cell_center(c.i, c.j)) < 0.5);
            assert_eq!(c.c_delta, f.value(c.i, c.j));
        }
    }

    #[test]
    fn svg_zero_is_neutral() {
        let svg = export_svg_choropleth(&delta(3, 2, 100.0, vec![0.0; 6])).unwrap();
        let fills = cell_fills(&svg);
        assert_eq!(fills.len(), 6);
        assert!(fills.iter().all(|&c| c == hex(NEUTRAL)));
        assert!(svg.contains(">0</text>"));
    }

    #[test]
    fn svg_single_positive_at_max() {
        let mut v = vec![0.0; 4];
        v[1] = 3e-7;
        let fills = export_svg_choropleth(&delta(2, 2, 100.0, v)).unwrap();
        let fills = cell_fills(&fills);
        assert_eq!(fills.iter().filter(|&&c| c == hex(RAMP_POSITIVE)).count(), 1);
        assert_eq!(fills.iter().filter(|&&c| c == hex(NEUTRAL)).count(), 3);
    }

    #[test]
    fn svg_negation_mirrors() {
        let v: Vec<f64> = (0..12).map(|k| ((k * 7 % 12) as f64 - 5.5) * 1e-8).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let a = export_svg_choropleth(&delta(4, 3, 100.0, v.clone())).unwrap();
        let b = export_svg_choropleth(&delta(4, 3, 100.0, neg)).unwrap();
        let anchor = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (fa, fb) = (cell_fills(&a), cell_fills(&b));
        // Rects are emitted in value order; only their y position is flipped.
        for (k, (ca, cb)) in fa.iter().zip(&fb).enumerate() {
            let value = v[k];
            assert_eq!(*ca, hex(ramp_color(value / anchor)));
            assert_eq!(*cb, hex(ramp_color(-value / anchor)));
        }
        assert_eq!(ramp_color(0.0), NEUTRAL);
        assert_eq!(ramp_color(1.0), RAMP_POSITIVE);
        assert_eq!(ramp_color(-1.0), RAMP_NEGATIVE);
        assert!(a.contains("<text class=\"tick\""));
    }
}
