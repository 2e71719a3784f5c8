use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Sanity bound on projected coordinates for city-scale work, meters.
pub const MAX_PROJECTED_ABS: f64 = 1e7;

/// Planar point. In projected frames `x` is meters east and `y` meters north
/// of the projection origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist2(self, other: Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(self, other: Self) -> T {
        self.dist2(other).sqrt()
    }

    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn lerp(self, other: Self, t: T) -> Self {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Scalar> Add for Point<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// WGS84 coordinate in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::validation(format!(
                "coordinate out of range: lat {}, lon {}",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// Local equirectangular projection about a city origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub origin: GeoPoint,
    pub earth_radius: f64,
}

impl Projection {
    pub fn new(origin: GeoPoint) -> Result<Self> {
        origin.validate()?;
        if origin.lat.abs() >= 89.0 {
            return Err(Error::validation(format!(
                "projection origin too close to a pole: lat {}",
                origin.lat
            )));
        }
        Ok(Projection {
            origin,
            earth_radius: EARTH_RADIUS_M,
        })
    }

    fn cos_lat0(&self) -> f64 {
        self.origin.lat.to_radians().cos()
    }

    pub fn project(&self, p: GeoPoint) -> Result<Point<f64>> {
        p.validate()?;
        let mut dlon = p.lon - self.origin.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let x = self.earth_radius * dlon.to_radians() * self.cos_lat0();
        let y = self.earth_radius * (p.lat - self.origin.lat).to_radians();
        if x.abs() >= MAX_PROJECTED_ABS || y.abs() >= MAX_PROJECTED_ABS {
            return Err(Error::validation(format!(
                "point ({}, {}) too far from projection origin",
                p.lat, p.lon
            )));
        }
        Ok(Point::new(x, y))
    }

    pub fn unproject(&self, p: Point<f64>) -> GeoPoint {
        let lat = self.origin.lat + (p.y / self.earth_radius).to_degrees();
        let mut lon = self.origin.lon + (p.x / (self.earth_radius * self.cos_lat0())).to_degrees();
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}
