use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::export::{export_delta_geojson, export_svg_choropleth};
use super::rank::{csv_field, rank_cities, RankingTable, ScoreRow};
use crate::density::{
    delta_field, kde_field, panorama_samples, uniform_road_samples, DensityField, GridSpec, DEFAULT_BANDWIDTH_M,
    DEFAULT_CELL_M, GRID_PAD_BANDWIDTHS,
};
use crate::divergence::{compare_samples, DistanceResult, KlConfig, SinkhornConfig};
use crate::error::{Error, Result};
use crate::geo::Projection;
use crate::ingest::{
    load_panos, parse_boundary, parse_roads, Boundary, LoadStats, PanoDataset, Provider, RoadClass, RoadNetwork,
    RoadParseStats,
};
use crate::planner::{execute_plan, ExecConfig, FixtureAdapter, RequestPlan};
use crate::stats::{
    coverage_percent, manova_two_group_named, CoverageResult, ManovaResult, DEFAULT_COVERAGE_THRESHOLD_M,
};

/// Everything one city run needs. Panoramas come either from `panos` or
/// from replaying `plan` against the `fixture` adapter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityRunConfig {
    pub city: String,
    pub provider: Provider,
    pub boundary: PathBuf,
    pub roads: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panos: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[serde(default = "default_road_class")]
    pub road_class: RoadClass,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_m: f64,
    #[serde(default = "default_cell")]
    pub cell_m: f64,
    #[serde(default = "default_threshold")]
    pub coverage_threshold_m: f64,
    #[serde(default)]
    pub kl: KlConfig,
    #[serde(default)]
    pub sinkhorn: SinkhornConfig,
    /// Per-city output directory; not echoed into `result.json`.
    #[serde(default, skip_serializing)]
    pub out: PathBuf,
    /// Worker threads for plan execution; not echoed into `result.json`.
    #[serde(default = "default_jobs", skip_serializing)]
    pub jobs: usize,
}

fn default_road_class() -> RoadClass {
    RoadClass::Driveable
}
fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_M
}
fn default_cell() -> f64 {
    DEFAULT_CELL_M
}
fn default_threshold() -> f64 {
    DEFAULT_COVERAGE_THRESHOLD_M
}
fn default_jobs() -> usize {
    1
}

impl CityRunConfig {
    pub fn new(city: impl Into<String>, provider: Provider, boundary: PathBuf, roads: PathBuf, panos: PathBuf) -> Self {
        CityRunConfig {
            city: city.into(),
            provider,
            boundary,
            roads,
            panos: Some(panos),
            plan: None,
            fixture: None,
            road_class: default_road_class(),
            bandwidth_m: DEFAULT_BANDWIDTH_M,
            cell_m: DEFAULT_CELL_M,
            coverage_threshold_m: DEFAULT_COVERAGE_THRESHOLD_M,
            kl: KlConfig::default(),
            sinkhorn: SinkhornConfig::default(),
            out: PathBuf::new(),
            jobs: 1,
        }
    }

    /// Checks parameters and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_m > 0.0) || !self.bandwidth_m.is_finite() {
            return Err(Error::validation(format!(
                "bandwidth_m must be positive, got {}",
                self.bandwidth_m
            )));
        }
        if !(self.cell_m > 0.0) || !self.cell_m.is_finite() {
            return Err(Error::validation(format!(
                "cell_m must be positive, got {}",
                self.cell_m
            )));
        }
        if !(self.coverage_threshold_m > 0.0) || !self.coverage_threshold_m.is_finite() {
            return Err(Error::validation(format!(
                "coverage_threshold_m must be positive, got {}",
                self.coverage_threshold_m
            )));
        }
        let mut inputs = vec![&self.boundary, &self.roads];
        match (&self.panos, &self.plan, &self.fixture) {
            (Some(p), None, None) => inputs.push(p),
            (None, Some(plan), Some(fixture)) => inputs.extend([plan, fixture]),
            _ => {
                return Err(Error::validation(format!(
                    "{}: give either `panos` or both `plan` and `fixture`",
                    self.city
                )))
            }
        }
        for p in inputs {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputSummary {
    pub n_roads: usize,
    pub road_length_m: f64,
    pub road_stats: RoadParseStats,
    pub n_panos: usize,
    pub pano_stats: LoadStats,
    pub n_prior_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSummary {
    pub grid: GridSpec<f64>,
    pub bandwidth_m: f64,
    pub real_integral: f64,
    pub uniform_integral: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Mass of the positive part of the difference field.
    pub delta_oversampled_mass: f64,
}

/// Contents of `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CityResult {
    pub city: String,
    pub provider: Provider,
    pub road_class: RoadClass,
    pub config: CityRunConfig,
    pub inputs: InputSummary,
    pub distances: DistanceResult,
    pub coverage: CoverageResult<f64>,
    pub manova: ManovaResult<f64>,
    pub fields: FieldSummary,
}

impl CityResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn score_row(&self) -> ScoreRow {
        ScoreRow {
            city: self.city.clone(),
            provider: self.provider.code().to_string(),
            emd: self.distances.emd,
            kl: self.distances.kl,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CityReport {
    pub result: CityResult,
    pub projection: Projection,
    pub real: DensityField<f64>,
    pub uniform: DensityField<f64>,
    pub delta: DensityField<f64>,
}

pub const COVERAGE_CSV_HEADER: &str =
    "city,provider,road_class,threshold_m,n_road_points,n_covered,coverage_pct,emd,kl";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e).in_stage("write", path.display().to_string()))
}

/// Parsed inputs of one city.
#[derive(Clone, Debug)]
pub struct CityInputs {
    pub boundary: Boundary,
    pub net: RoadNetwork,
    pub panos: PanoDataset,
    /// Path the panoramas came from (pano file or plan), for error messages.
    pub panos_path: String,
}

/// Validates `cfg` and runs the ingest stages (boundary, roads, panoramas or
/// plan replay). Errors carry the stage name and input path.
pub fn load_inputs(cfg: &CityRunConfig) -> Result<CityInputs> {
    cfg.validate().map_err(|e| e.in_stage("config", cfg.city.clone()))?;
    let at = |p: &Path| p.display().to_string();

    let boundary = read(&cfg.boundary)
        .and_then(|t| parse_boundary(&t))
        .map_err(|e| e.in_stage("boundary", at(&cfg.boundary)))?;
    let net = read(&cfg.roads)
        .and_then(|t| parse_roads(&t, &boundary, cfg.road_class))
        .map_err(|e| e.in_stage("roads", at(&cfg.roads)))?;
    let mut panos = match (&cfg.panos, &cfg.plan, &cfg.fixture) {
        (Some(path), _, _) => read(path)
            .and_then(|t| load_panos(&t, &boundary, cfg.provider))
            .map_err(|e| e.in_stage("panos", at(path)))?,
        (None, Some(plan), Some(fixture)) => {
            let plan_q = read(plan)
                .and_then(|t| RequestPlan::from_jsonl(&t, cfg.provider))
                .map_err(|e| e.in_stage("plan", at(plan)))?;
            let adapter = read(fixture)
                .and_then(|t| FixtureAdapter::from_jsonl(&t, cfg.provider))
                .map_err(|e| e.in_stage("fixture", at(fixture)))?;
            let exec = ExecConfig {
                jobs: cfg.jobs.max(1),
                ..ExecConfig::default()
            };
            execute_plan(&plan_q, &adapter, &boundary, &exec).map_err(|e| e.in_stage("fetch", at(plan)))?
        }
        _ => unreachable!("validated"),
    };
    panos.city = cfg.city.clone();
    panos.road_class = Some(cfg.road_class);
    let panos_path = cfg
        .panos
        .as_ref()
        .or(cfg.plan.as_ref())
        .map(|p| at(p))
        .unwrap_or_default();
    if panos.is_empty() {
        return Err(Error::validation("no panoramas inside the boundary").in_stage("panos", panos_path));
    }
    Ok(CityInputs {
        boundary,
        net,
        panos,
        panos_path,
    })
}

/// Uniform, real and difference fields on the grid covering the boundary
/// padded by four bandwidths.
pub fn density_fields(
    inputs: &CityInputs,
    bandwidth: f64,
    cell: f64,
) -> Result<(DensityField<f64>, DensityField<f64>, DensityField<f64>)> {
    let prior = uniform_road_samples(&inputs.net)?;
    let grid = GridSpec::covering(inputs.boundary.polygon.bbox(), cell, GRID_PAD_BANDWIDTHS * bandwidth)?;
    let uniform = kde_field(&prior, bandwidth, &grid)?;
    let real = kde_field(&panorama_samples(&inputs.panos), bandwidth, &grid)?;
    let delta = delta_field(&real, &uniform)?;
    Ok((real, uniform, delta))
}

/// Runs ingest, priors, density fields, distances, coverage and MANOVA for
/// one city, then writes its artifacts to `cfg.out` when that is non-empty.
pub fn run_city(cfg: &CityRunConfig) -> Result<CityReport> {
    let inputs = load_inputs(cfg)?;
    let CityInputs {
        boundary,
        net,
        panos,
        panos_path: panos_at,
    } = &inputs;
    let at = |p: &Path| p.display().to_string();

    let prior = uniform_road_samples(net).map_err(|e| e.in_stage("prior", at(&cfg.roads)))?;
    let real_samples = panorama_samples(panos);
    let h = cfg.bandwidth_m;
    let (real, uniform, delta) =
        density_fields(&inputs, h, cfg.cell_m).map_err(|e| e.in_stage("density", panos_at.clone()))?;
    let grid = delta.grid;

    let distances = compare_samples(&real_samples, &prior, &cfg.kl, &cfg.sinkhorn)
        .map_err(|e| e.in_stage("compare", panos_at.clone()))?;
    let coverage =
        coverage_percent(net, panos, cfg.coverage_threshold_m).map_err(|e| e.in_stage("coverage", panos_at.clone()))?;
    let manova = manova_two_group_named(real_samples.points(), "panoramas", prior.points(), "road prior")
        .map_err(|e| e.in_stage("manova", panos_at.clone()))?;

    let (delta_min, delta_max) = delta.min_max();
    let result = CityResult {
        city: cfg.city.clone(),
        provider: cfg.provider,
        road_class: cfg.road_class,
        config: cfg.clone(),
        inputs: InputSummary {
            n_roads: net.roads.len(),
            road_length_m: net.total_length(),
            road_stats: net.stats.clone(),
            n_panos: panos.len(),
            pano_stats: panos.stats.clone(),
            n_prior_samples: prior.len(),
        },
        distances,
        coverage,
        manova,
        fields: FieldSummary {
            grid,
            bandwidth_m: h,
            real_integral: real.integral(),
            uniform_integral: uniform.integral(),
            delta_min,
            delta_max,
            delta_oversampled_mass: delta.values.iter().map(|v| v.max(0.0)).sum::<f64>() * grid.cell_area(),
        },
    };
    let report = CityReport {
        result,
        projection: boundary.projection,
        real,
        uniform,
        delta,
    };
    if !cfg.out.as_os_str().is_empty() {
        write_city(&report, &cfg.out, Some(&boundary.polygon), panos)?;
    }
    Ok(report)
}

/// Writes `result.json`, the three density fields, `c_delta.geojson`,
/// `c_delta.svg`, `manova.csv` and `coverage.csv` into `dir`.
pub fn write_city(
    report: &CityReport,
    dir: &Path,
    boundary: Option<&crate::geo::Polygon<f64>>,
    panos: &PanoDataset,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("write", dir.display().to_string()))?;
    let r = &report.result;
    write(dir, "result.json", &r.to_json())?;
    write(dir, "c_real.json", &report.real.to_json(&report.projection))?;
    write(dir, "c_uniform.json", &report.uniform.to_json(&report.projection))?;
    write(dir, "c_delta.json", &report.delta.to_json(&report.projection))?;
    let geojson = export_delta_geojson(&report.delta, &report.projection, boundary)
        .map_err(|e| e.in_stage("write", "c_delta.geojson"))?;
    write(dir, "c_delta.geojson", &geojson)?;
    let svg = export_svg_choropleth(&report.delta).map_err(|e| e.in_stage("write", "c_delta.svg"))?;
    write(dir, "c_delta.svg", &svg)?;
    let provider = r.provider.code();
    write(
        dir,
        "manova.csv",
        &format!(
            "{}\n{}\n",
            ManovaResult::<f64>::CSV_HEADER,
            r.manova.csv_row(&r.city, provider)
        ),
    )?;
    write(dir, "coverage.csv", &coverage_csv(std::slice::from_ref(r)))?;
    write(dir, "panos.jsonl", &panos.to_jsonl())?;
    Ok(())
}

pub fn coverage_csv(results: &[CityResult]) -> String {
    let mut out = String::from(COVERAGE_CSV_HEADER);
    out.push('\n');
    for r in results {
        let c = &r.coverage;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.3},{:e},{:e}",
            csv_field(&r.city),
            r.provider.code(),
            r.road_class.label(),
            c.threshold,
            c.n_road_points,
            c.n_covered,
            100.0 * c.covered_fraction,
            r.distances.emd,
            r.distances.kl
        );
    }
    out
}

/// Runs cities on at most `jobs` workers; results keep input order.
pub fn run_batch(cfgs: &[CityRunConfig], jobs: usize) -> Result<Vec<Result<CityReport>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cfgs.par_iter().map(run_city).collect()))
}

pub fn ranking_of(results: &[CityResult]) -> Result<RankingTable> {
    rank_cities(&results.iter().map(CityResult::score_row).collect::<Vec<_>>())
}
