//! Synthetic grid cities and collection-driver simulations with known bias.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, IndexedPolygon, Point, Polygon, Polyline, Projection};
use crate::ingest::{
    Boundary, LoadStats, PanoDataset, PanoRecord, Provider, Road, RoadClass, RoadNetwork, RoadParseStats,
};

/// Default projection origin of synthetic cities.
pub const DEFAULT_ORIGIN: GeoPoint = GeoPoint { lat: 52.0, lon: 4.9 };
/// Gap between the street grid and the boundary, in meters.
pub const BOUNDARY_MARGIN_M: f64 = 20.0;

#[derive(Clone, Debug)]
pub struct SynthCity {
    pub boundary: Boundary,
    pub net: RoadNetwork,
    pub nx: usize,
    pub ny: usize,
    pub block: f64,
    pub seed: u64,
}

impl SynthCity {
    /// Street grid extent `(min, max)` in projected meters.
    pub fn extent(&self) -> (Point<f64>, Point<f64>) {
        let (w, h) = (self.nx as f64 * self.block, self.ny as f64 * self.block);
        (Point::new(-w / 2.0, -h / 2.0), Point::new(w / 2.0, h / 2.0))
    }

    /// Axis-aligned square of side `side` centered on the grid center.
    pub fn center_square(&self, side: f64) -> Result<Polygon<f64>> {
        Polygon::rect(Point::new(-side / 2.0, -side / 2.0), Point::new(side / 2.0, side / 2.0))
    }
}

/// Manhattan grid of `nx × ny` blocks: `ny + 1` east–west streets of length
/// `nx·block` and `nx + 1` north–south streets of length `ny·block`, centered
/// on the projection origin.
pub fn gen_city(nx: usize, ny: usize, block: f64, seed: u64) -> Result<SynthCity> {
    gen_city_at(DEFAULT_ORIGIN, nx, ny, block, seed)
}

pub fn gen_city_at(origin: GeoPoint, nx: usize, ny: usize, block: f64, seed: u64) -> Result<SynthCity> {
    if nx == 0 || ny == 0 {
        return Err(Error::validation("synthetic city needs at least one block per axis"));
    }
    if !(block > 0.0) || !block.is_finite() {
        return Err(Error::validation(format!("block size must be positive, got {block}")));
    }
    let projection = Projection::new(origin)?;
    let (w, h) = (nx as f64 * block, ny as f64 * block);
    let (x0, y0) = (-w / 2.0, -h / 2.0);
    let polygon = Polygon::rect(
        Point::new(x0 - BOUNDARY_MARGIN_M, y0 - BOUNDARY_MARGIN_M),
        Point::new(x0 + w + BOUNDARY_MARGIN_M, y0 + h + BOUNDARY_MARGIN_M),
    )?;
    let mut roads = Vec::with_capacity(nx + ny + 2);
    let mut street = |a: Point<f64>, b: Point<f64>| -> Result<()> {
        roads.push(Road {
            way_id: roads.len() as i64 + 1,
            class: RoadClass::Driveable,
            highway: "residential".into(),
            parts: vec![Polyline::new(vec![a, b])?],
        });
        Ok(())
    };
    for j in 0..=ny {
        let y = y0 + j as f64 * block;
        street(Point::new(x0, y), Point::new(x0 + w, y))?;
    }
    for i in 0..=nx {
        let x = x0 + i as f64 * block;
        street(Point::new(x, y0), Point::new(x, y0 + h))?;
    }
    let net = RoadNetwork {
        roads,
        boundary: polygon.clone(),
        projection,
        stats: RoadParseStats::default(),
    };
    Ok(SynthCity {
        boundary: Boundary { polygon, projection },
        net,
        nx,
        ny,
        block,
        seed,
    })
}

#[derive(Clone, Debug)]
pub enum DriverPolicy {
    /// Every street driven `passes` times.
    Uniform { passes: u32 },
    /// Streets touching `center_region` driven `factor` times, others once.
    CenterBiased { factor: u32, center_region: Polygon<f64> },
    /// One pass per street; with probability `p_obstruct` a prefix of length
    /// U(0, street length) is driven again the next day.
    ObstructionRedrive { p_obstruct: f64 },
    /// Each point receives the pass count of the first region containing it
    /// (0 outside every region).
    Territories { regions: Vec<(Polygon<f64>, u32)> },
}

impl DriverPolicy {
    fn validate(&self) -> Result<()> {
        match self {
            DriverPolicy::CenterBiased { factor, .. } if *factor < 1 => {
                Err(Error::validation("center bias factor must be at least 1"))
            }
            DriverPolicy::ObstructionRedrive { p_obstruct } if !(0.0..=1.0).contains(p_obstruct) => Err(
                Error::validation(format!("p_obstruct must be in [0, 1], got {p_obstruct}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Where along a pass the first panorama falls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// At the street start, so passes repeat the same locations.
    #[default]
    Aligned,
    /// Uniform offset in `[0, interval)` drawn per pass.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub pano_interval: f64,
    pub seed: u64,
    pub phase: Phase,
}

/// Capture date of the first pass; pass `k` is `k` days later.
fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 6, 1).expect("valid date")
}

pub fn simulate_drive(city: &SynthCity, policy: &DriverPolicy, pano_interval: f64, seed: u64) -> Result<PanoDataset> {
    simulate_drive_with(
        city,
        policy,
        &SimOptions {
            pano_interval,
            seed,
            phase: Phase::Aligned,
        },
    )
}

pub fn simulate_drive_with(city: &SynthCity, policy: &DriverPolicy, opts: &SimOptions) -> Result<PanoDataset> {
    policy.validate()?;
    let interval = opts.pano_interval;
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::validation(format!(
            "pano interval must be positive, got {interval}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draw_offset = |rng: &mut ChaCha8Rng| match opts.phase {
        Phase::Aligned => 0.0,
        Phase::Random => rng.gen_range(0.0..interval),
    };
    let proj = city.boundary.projection;
    let mut records = Vec::new();
    let mut emit = |id: String, p: Point<f64>, day: u64| {
        records.push(PanoRecord {
            id,
            provider: Provider::Other,
            location: proj.unproject(p),
            captured_at: base_date().checked_add_days(Days::new(day)),
        });
    };
    let center: Option<IndexedPolygon<f64>> = match policy {
        DriverPolicy::CenterBiased { center_region, .. } => Some(center_region.prepare()),
        _ => None,
    };
    let territories: Vec<(IndexedPolygon<f64>, u32)> = match policy {
        DriverPolicy::Territories { regions } => regions.iter().map(|(p, n)| (p.prepare(), *n)).collect(),
        _ => Vec::new(),
    };

    for road in &city.net.roads {
        for line in &road.parts {
            let way = road.way_id;
            let passes = match policy {
                DriverPolicy::Uniform { passes } => *passes,
                DriverPolicy::CenterBiased { factor, .. } => {
                    let region = center.as_ref().expect("center region");
                    let touches = line.points().windows(2).any(|w| region.segment_touches(w[0], w[1]));
                    if touches {
                        *factor
                    } else {
                        1
                    }
                }
                DriverPolicy::ObstructionRedrive { .. } => 1,
                DriverPolicy::Territories { regions } => regions.iter().map(|r| r.1).max().unwrap_or(0),
            };
            for pass in 0..passes {
                let offset = draw_offset(&mut rng);
                for (k, p) in line.resample_from(offset, interval)?.into_iter().enumerate() {
                    if !territories.is_empty() {
                        let quota = territories.iter().find(|(r, _)| r.contains(p)).map_or(0, |t| t.1);
                        if pass >= quota {
                            continue;
                        }
                    }
                    emit(format!("w{way}-p{pass}-{k}"), p, pass as u64);
                }
            }
            if let DriverPolicy::ObstructionRedrive { p_obstruct } = policy {
                if rng.gen_bool(*p_obstruct) {
                    let prefix = rng.gen_range(0.0..=line.length());
                    let offset = draw_offset(&mut rng);
                    for (k, p) in line.resample_prefix(offset, interval, prefix)?.into_iter().enumerate() {
                        emit(format!("w{way}-r1-{k}"), p, 1);
                    }
                }
            }
        }
    }
    let stats = LoadStats {
        lines: records.len(),
        ..LoadStats::default()
    };
    Ok(PanoDataset {
        city: "synthetic".into(),
        provider: Provider::Other,
        road_class: Some(RoadClass::Driveable),
        records,
        projection: proj,
        stats,
    })
}

/// Input files written by [`write_fixture`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixturePaths {
    pub boundary: PathBuf,
    pub roads: PathBuf,
    pub panos: PathBuf,
}

/// Writes `boundary.geojson`, `roads.geojson` and `panos.jsonl` into `dir`
/// in the formats the ingest stage reads.
pub fn write_fixture(city: &SynthCity, panos: &PanoDataset, dir: &Path) -> Result<FixturePaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = FixturePaths {
        boundary: dir.join("boundary.geojson"),
        roads: dir.join("roads.geojson"),
        panos: dir.join("panos.jsonl"),
    };
    for (path, text) in [
        (&paths.boundary, city.boundary.to_geojson()),
        (&paths.roads, city.net.to_geojson()),
        (&paths.panos, panos.to_jsonl()),
    ] {
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(paths)
}
