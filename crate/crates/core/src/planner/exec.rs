use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{Query, RequestPlan};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, EARTH_RADIUS_M};
use crate::ingest::{clip_to_boundary, dedup_by_id, Boundary, LoadStats, PanoDataset, PanoRecord, Provider};

/// Source of panorama metadata for individual queries.
///
/// `execute` must be read-only and repeatable: the same query returns the
/// same records every time it succeeds.
pub trait ProviderAdapter: Sync {
    fn execute(&self, query: &Query) -> std::result::Result<Vec<PanoRecord>, String>;

    /// Maximum queries per second, if limited.
    fn rate_limit(&self) -> Option<f64> {
        None
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Replays a local panorama file. PointRadius returns every record within the
/// radius (haversine), Tile every record inside the lat/lon box.
#[derive(Clone, Debug)]
pub struct FixtureAdapter {
    /// Sorted by latitude for band lookups.
    records: Vec<PanoRecord>,
    order: Vec<usize>,
    rate_limit: Option<f64>,
}

impl FixtureAdapter {
    pub fn new(records: Vec<PanoRecord>) -> Self {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| {
            records[a]
                .location
                .lat
                .total_cmp(&records[b].location.lat)
                .then(a.cmp(&b))
        });
        FixtureAdapter {
            records,
            order,
            rate_limit: None,
        }
    }

    /// Parses a JSON-lines panorama file; every line must be well formed.
    pub fn from_jsonl(text: &str, provider: Provider) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r = PanoRecord::from_json(line.trim(), provider)
                .map_err(|e| Error::validation(format!("fixture line {}: {e}", i + 1)))?;
            records.push(r);
        }
        Ok(FixtureAdapter::new(records))
    }

    pub fn with_rate_limit(mut self, qps: f64) -> Self {
        self.rate_limit = Some(qps);
        self
    }

    /// Records with latitude in `[lo, hi]`, in input order.
    fn band(&self, lo: f64, hi: f64) -> Vec<&PanoRecord> {
        let start = self.order.partition_point(|&i| self.records[i].location.lat < lo);
        let end = self.order.partition_point(|&i| self.records[i].location.lat <= hi);
        let mut idx: Vec<usize> = self.order[start..end].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.records[i]).collect()
    }
}

impl ProviderAdapter for FixtureAdapter {
    fn execute(&self, query: &Query) -> std::result::Result<Vec<PanoRecord>, String> {
        Ok(match *query {
            Query::PointRadius { lat, lon, radius_m } => {
                let center = GeoPoint { lat, lon };
                let dlat = (radius_m / EARTH_RADIUS_M).to_degrees() * 1.001;
                self.band(lat - dlat, lat + dlat)
                    .into_iter()
                    .filter(|r| haversine_m(center, r.location) <= radius_m)
                    .cloned()
                    .collect()
            }
            Query::Tile {
                min_lat,
                min_lon,
                max_lat,
                max_lon,
            } => self
                .band(min_lat, max_lat)
                .into_iter()
                .filter(|r| (min_lon..=max_lon).contains(&r.location.lon))
                .cloned()
                .collect(),
        })
    }

    fn rate_limit(&self) -> Option<f64> {
        self.rate_limit
    }
}

#[derive(Clone, Debug)]
pub struct ExecConfig {
    /// Attempts per query, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles on each further attempt.
    pub backoff: Duration,
    /// Worker threads; results are gathered in plan order regardless.
    pub jobs: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_attempts: 3,
            backoff: Duration::from_millis(200),
            jobs: 1,
        }
    }
}

struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(qps: Option<f64>) -> Self {
        RateLimiter {
            interval: qps.filter(|q| *q > 0.0).map(|q| Duration::from_secs_f64(1.0 / q)),
            next: Mutex::new(None),
        }
    }

    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let slot = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// Runs every query, concatenates results in plan order, then deduplicates
/// by id and clips to the boundary.
///
/// A query that still fails after `max_attempts` aborts the run with
/// [`Error::Adapter`], whose index is 1-based plan line order.
pub fn execute_plan(
    plan: &RequestPlan,
    adapter: &dyn ProviderAdapter,
    boundary: &Boundary,
    config: &ExecConfig,
) -> Result<PanoDataset> {
    let attempts = config.max_attempts.max(1);
    let limiter = RateLimiter::new(adapter.rate_limit());
    let run_one = |(i, q): (usize, &Query)| -> Result<Vec<PanoRecord>> {
        let mut delay = config.backoff;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            limiter.acquire();
            match adapter.execute(q) {
                Ok(r) => return Ok(r),
                Err(e) => last = e,
            }
        }
        Err(Error::Adapter {
            index: i + 1,
            attempts,
            message: last,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    let per_query: Vec<Result<Vec<PanoRecord>>> =
        pool.install(|| plan.queries.par_iter().enumerate().map(run_one).collect());

    let mut records = Vec::new();
    for r in per_query {
        records.extend(r?);
    }
    let mut stats = LoadStats {
        lines: records.len(),
        ..LoadStats::default()
    };
    stats.duplicates = dedup_by_id(&mut records);
    stats.outside = clip_to_boundary(&mut records, &boundary.polygon.prepare(), &boundary.projection);
    Ok(PanoDataset {
        city: String::new(),
        provider: plan.provider,
        road_class: None,
        records,
        projection: boundary.projection,
        stats,
    })
}
