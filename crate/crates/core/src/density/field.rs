use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{json_error, Error, Result};
use crate::geo::{Bbox, GeoPoint, Point, Projection};
use crate::scalar::Scalar;

/// Regular grid of square cells. `origin` is the lower-left corner; cell
/// `(i, j)` spans `[origin + i·cell, origin + (i+1)·cell)` in x and likewise in y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub origin: Point<T>,
    pub cell_size: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(origin: Point<T>, cell_size: T, nx: usize, ny: usize) -> Result<Self> {
        if !(cell_size > T::zero()) || !cell_size.is_finite() {
            return Err(Error::validation(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::validation("grid must have at least one cell"));
        }
        Ok(GridSpec {
            origin,
            cell_size,
            nx,
            ny,
        })
    }

    /// Smallest grid anchored at `bbox.min - pad` covering `bbox` padded by `pad`.
    pub fn covering(bbox: Bbox<T>, cell_size: T, pad: T) -> Result<Self> {
        let b = bbox.padded(pad);
        let cells = |extent: T| -> usize {
            (extent / cell_size - T::lit(1e-9))
                .ceil()
                .max(T::one())
                .to_usize()
                .unwrap_or(0)
        };
        if !(cell_size > T::zero()) {
            return Err(Error::validation(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        GridSpec::new(b.min, cell_size, cells(b.width()), cells(b.height()))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point<T> {
        let half = T::lit(0.5);
        Point::new(
            self.origin.x + self.cell_size * (T::from_count(i) + half),
            self.origin.y + self.cell_size * (T::from_count(j) + half),
        )
    }

    /// Row-major value index.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_bbox(&self, i: usize, j: usize) -> Bbox<T> {
        let min = Point::new(
            self.origin.x + self.cell_size * T::from_count(i),
            self.origin.y + self.cell_size * T::from_count(j),
        );
        Bbox::new(min, Point::new(min.x + self.cell_size, min.y + self.cell_size))
    }

    pub fn cell_area(&self) -> T {
        self.cell_size * self.cell_size
    }

    pub fn translated(&self, offset: Point<T>) -> Self {
        GridSpec {
            origin: self.origin + offset,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Uniform,
    Real,
    Delta,
}

/// Density per m² at cell centers, row-major (`values[j·nx + i]`, `j` from south).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    pub kind: FieldKind,
    pub bandwidth: Option<T>,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    origin_lat: f64,
    origin_lon: f64,
    origin_x: f64,
    origin_y: f64,
    projection_lat: f64,
    projection_lon: f64,
    cell_size: f64,
    nx: usize,
    ny: usize,
    kind: FieldKind,
    bandwidth: Option<f64>,
    values: Vec<f64>,
}

impl<T: Scalar> DensityField<T> {
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    /// Σ values · cell area: total probability mass on the grid.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_area()
    }

    /// Mass inside cells whose centers satisfy `pred`.
    pub fn mass_where(&self, pred: impl Fn(Point<T>) -> bool) -> T {
        let mut total = T::zero();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if pred(self.grid.cell_center(i, j)) {
                    total = total + self.value(i, j);
                }
            }
        }
        total * self.grid.cell_area()
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// JSON header (origin in lat/lon and meters, cell size, counts, kind,
    /// bandwidth, projection origin) plus the row-major value array.
    pub fn to_json(&self, projection: &Projection) -> String {
        let origin = Point::new(self.grid.origin.x.as_f64(), self.grid.origin.y.as_f64());
        let g = projection.unproject(origin);
        let body = FieldJson {
            origin_lat: g.lat,
            origin_lon: g.lon,
            origin_x: origin.x,
            origin_y: origin.y,
            projection_lat: projection.origin.lat,
            projection_lon: projection.origin.lon,
            cell_size: self.grid.cell_size.as_f64(),
            nx: self.grid.nx,
            ny: self.grid.ny,
            kind: self.kind,
            bandwidth: self.bandwidth.map(Scalar::as_f64),
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        };
        serde_json::to_string(&body).expect("serializable")
    }
}

impl DensityField<f64> {
    pub fn from_json(text: &str) -> Result<(DensityField<f64>, Projection)> {
        let body: FieldJson = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        let grid = GridSpec::new(
            Point::new(body.origin_x, body.origin_y),
            body.cell_size,
            body.nx,
            body.ny,
        )?;
        if body.values.len() != grid.len() {
            return Err(Error::validation(format!(
                "field has {} values for a {}x{} grid",
                body.values.len(),
                body.nx,
                body.ny
            )));
        }
        let projection = Projection::new(GeoPoint {
            lat: body.projection_lat,
            lon: body.projection_lon,
        })?;
        let field = DensityField {
            grid,
            values: body.values,
            kind: body.kind,
            bandwidth: body.bandwidth,
        };
        Ok((field, projection))
    }

    /// Serialized form with only the header fields, for logs and result files.
    pub fn header_json(&self) -> serde_json::Value {
        json!({
            "cell_size": self.grid.cell_size,
            "nx": self.grid.nx,
            "ny": self.grid.ny,
            "kind": self.kind,
            "bandwidth": self.bandwidth,
        })
    }
}

/// Cellwise `real − uniform`. Positive cells are oversampled.
pub fn delta_field<T: Scalar>(real: &DensityField<T>, uniform: &DensityField<T>) -> Result<DensityField<T>> {
    if real.grid != uniform.grid {
        return Err(Error::validation(format!(
            "grid mismatch: {}x{} vs {}x{}",
            real.grid.nx, real.grid.ny, uniform.grid.nx, uniform.grid.ny
        )));
    }
    Ok(DensityField {
        grid: real.grid,
        values: real.values.iter().zip(&uniform.values).map(|(&a, &b)| a - b).collect(),
        kind: FieldKind::Delta,
        bandwidth: real.bandwidth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>, nx: usize, ny: usize, kind: FieldKind) -> DensityField<f64> {
        DensityField {
            grid: GridSpec::new(Point::new(-100.0, 250.0), 50.0, nx, ny).unwrap(),
            values,
            kind,
            bandwidth: Some(20.0),
        }
    }

    #[test]
    fn covering_grid() {
        let bb = Bbox::new(Point::new(0.0, 0.0), Point::new(1000.0, 450.0));
        let g = GridSpec::covering(bb, 100.0, 50.0).unwrap();
        assert_eq!((g.nx, g.ny), (11, 6));
        assert_eq!(g.origin, Point::new(-50.0, -50.0));
        assert_eq!(g.cell_center(0, 0), Point::new(0.0, 0.0));
        assert_eq!(g.index(3, 2), 2 * 11 + 3);
    }

    #[test]
    fn delta_of_identical_fields_is_zero() {
        let f = field((0..12).map(|v| v as f64 * 1e-6).collect(), 4, 3, FieldKind::Real);
        let d = delta_field(&f, &f).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        assert_eq!(d.kind, FieldKind::Delta);
    }

    #[test]
    fn delta_grid_mismatch() {
        let a = field(vec![0.0; 12], 4, 3, FieldKind::Real);
        let b = field(vec![0.0; 15], 5, 3, FieldKind::Uniform);
        assert!(matches!(delta_field(&a, &b), Err(Error::Validation(_))));
    }

    #[test]
    fn json_round_trip() {
        let f = field(
            (0..12).map(|v| (v as f64).sqrt() * 1e-7).collect(),
            4,
            3,
            FieldKind::Uniform,
        );
        let proj = Projection::new(GeoPoint { lat: 40.4, lon: -3.7 }).unwrap();
        let text = f.to_json(&proj);
        let (back, p) = DensityField::from_json(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(p, proj);
        assert_eq!(back.to_json(&p), text);
    }
}
