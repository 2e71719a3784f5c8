//! `streetcov`: street-view coverage distribution analysis from the command line.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use streetcov_core::density::{panorama_samples, uniform_road_samples};
use streetcov_core::divergence::compare_samples;
use streetcov_core::geo::Point;
use streetcov_core::ingest::{parse_boundary, Provider, RoadClass};
use streetcov_core::planner::{
    execute_plan, plan_amsterdam, plan_gsv, plan_mapillary, ExecConfig, FixtureAdapter, RequestPlan,
};
use streetcov_core::report::{
    coverage_csv, density_fields, export_delta_geojson, export_svg_choropleth, load_inputs, rank_cities, ranking_of,
    run_batch, CityResult, ScoreRow,
};
use streetcov_core::stats::{coverage_percent, manova_two_group_named, ManovaResult};
use streetcov_core::synth::{gen_city, simulate_drive_with, write_fixture, DriverPolicy, Phase, SimOptions};

use config::{BatchConfig, InputError, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "streetcov",
    version,
    about = "Compare street-view panorama locations against a road-network prior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone, Default)]
struct Global {
    /// Run configuration (JSON). Relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for cities and plan execution.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for Sinkhorn subsampling and synthetic cities.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    road_class: Option<RoadClassArg>,
    #[arg(long = "bandwidth-m", global = true)]
    bandwidth_m: Option<f64>,
    #[arg(long = "cell-m", global = true)]
    cell_m: Option<f64>,
    /// Sinkhorn target blur.
    #[arg(long, global = true)]
    blur: Option<f64>,
    /// Neighbour order of the KL estimator.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Coverage distance threshold.
    #[arg(long = "threshold-m", global = true)]
    threshold_m: Option<f64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RoadClassArg {
    Driveable,
    Public,
}

impl From<RoadClassArg> for RoadClass {
    fn from(a: RoadClassArg) -> Self {
        match a {
            RoadClassArg::Driveable => RoadClass::Driveable,
            RoadClassArg::Public => RoadClass::PublicOnly,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProviderArg {
    Gsv,
    Mly,
    Ams,
    Other,
}

impl From<ProviderArg> for Provider {
    fn from(a: ProviderArg) -> Self {
        match a {
            ProviderArg::Gsv => Provider::Gsv,
            ProviderArg::Mly => Provider::Mly,
            ProviderArg::Ams => Provider::Ams,
            ProviderArg::Other => Provider::Other,
        }
    }
}

/// Inputs of a single city, given either by `--config` (first city) or by flags.
#[derive(Args, Debug, Clone)]
struct CityArgs {
    #[arg(long)]
    city: Option<String>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    roads: Option<PathBuf>,
    #[arg(long)]
    panos: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyArg {
    Uniform,
    CenterBiased,
    Redrive,
    Territories,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the request plan for a boundary as JSON lines.
    Plan {
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long, value_enum)]
        provider: ProviderArg,
    },
    /// Replay a plan against a local fixture and write the deduplicated panoramas.
    Fetch {
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, value_enum)]
        provider: ProviderArg,
    },
    /// Parse and clip roads and panoramas; write them in normalized form.
    Ingest(CityArgs),
    /// Uniform, real and difference density fields plus map exports.
    Density(CityArgs),
    /// kNN KL divergence and Sinkhorn EMD.
    Compare(CityArgs),
    /// Binary coverage at the distance threshold.
    Coverage(CityArgs),
    /// Two-group MANOVA of panorama vs road-prior coordinates.
    Manova(CityArgs),
    /// Generate a synthetic grid city, simulate a driver policy and write its inputs and config.
    Simulate {
        #[arg(long, default_value_t = 20)]
        nx: usize,
        #[arg(long, default_value_t = 20)]
        ny: usize,
        #[arg(long = "block-m", default_value_t = 100.0)]
        block_m: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        policy: PolicyArg,
        /// Passes per street (uniform) or center pass factor (center-biased).
        #[arg(long, default_value_t = 1)]
        passes: u32,
        /// Side of the square center region, for center-biased.
        #[arg(long = "center-m", default_value_t = 600.0)]
        center_m: f64,
        #[arg(long = "p-obstruct", default_value_t = 0.2)]
        p_obstruct: f64,
        #[arg(long = "interval-m", default_value_t = 20.0)]
        interval_m: f64,
        /// Draw a random start offset per pass instead of starting at the street end.
        #[arg(long)]
        random_phase: bool,
    },
    /// Rank (city, provider) scores from a CSV with `city,provider,emd,kl` columns.
    Rank {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full pipeline for every city in `--config`.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = render(&e);
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Context chain joined by `: `, stopping after the first core error
/// because its message already includes its sources.
fn render(e: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in e.chain() {
        parts.push(cause.to_string());
        if cause.is::<streetcov_core::Error>() {
            break;
        }
    }
    parts.join(": ")
}

/// 2 for bad input or configuration, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<streetcov_core::Error>() {
            return if core.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<InputError>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
    }
    1
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| streetcov_core::Error::io(path, e).into())
}

fn write_out(out: Option<&Path>, name: &str, text: &str) -> anyhow::Result<()> {
    match out {
        None => print!("{text}"),
        Some(p) => {
            let path = if p.is_dir() { p.join(name) } else { p.to_path_buf() };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| streetcov_core::Error::io(dir, e))?;
            }
            fs::write(&path, text).map_err(|e| streetcov_core::Error::io(&path, e))?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn out_dir(g: &Global) -> anyhow::Result<PathBuf> {
    let Some(dir) = g.out.clone() else {
        return Err(InputError("--out <dir> is required".into()).into());
    };
    fs::create_dir_all(&dir).map_err(|e| streetcov_core::Error::io(&dir, e))?;
    Ok(dir)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let overrides = Overrides::from_flags(
        g.jobs,
        g.seed,
        g.road_class.map(Into::into),
        g.bandwidth_m,
        g.cell_m,
        g.blur,
        g.k,
        g.threshold_m,
    );
    match cli.command {
        Command::Plan { boundary, provider } => {
            let b = parse_boundary(&read(&boundary)?).with_context(|| format!("boundary {}", boundary.display()))?;
            let plan = match Provider::from(provider) {
                Provider::Gsv => plan_gsv(&b)?,
                Provider::Mly => plan_mapillary(&b)?,
                Provider::Ams => plan_amsterdam(&b)?,
                Provider::Other => bail!(InputError("no request plan for provider Other".into())),
            };
            info!("{} queries", plan.len());
            write_out(g.out.as_deref(), "plan.jsonl", &plan.to_jsonl())
        }
        Command::Fetch {
            boundary,
            plan,
            fixture,
            provider,
        } => {
            let provider = Provider::from(provider);
            let b = parse_boundary(&read(&boundary)?)?;
            let plan = RequestPlan::from_jsonl(&read(&plan)?, provider)?;
            let adapter = FixtureAdapter::from_jsonl(&read(&fixture)?, provider)?;
            let exec = ExecConfig {
                jobs: g.jobs.unwrap_or(1),
                ..ExecConfig::default()
            };
            let ds = execute_plan(&plan, &adapter, &b, &exec)?;
            info!(
                "{} panoramas ({} duplicates, {} outside)",
                ds.len(),
                ds.stats.duplicates,
                ds.stats.outside
            );
            write_out(g.out.as_deref(), "panos.jsonl", &ds.to_jsonl())
        }
        Command::Ingest(args) => {
            let cfg = config::single_city(g.config.as_deref(), &args_to_city(&args), &overrides)?;
            let inputs = load_inputs(&cfg)?;
            let dir = out_dir(g)?;
            write_out(Some(&dir), "roads.geojson", &inputs.net.to_geojson())?;
            write_out(Some(&dir), "panos.jsonl", &inputs.panos.to_jsonl())?;
            println!(
                "{}: {} roads ({:.0} m), {} panoramas",
                cfg.city,
                inputs.net.roads.len(),
                inputs.net.total_length(),
                inputs.panos.len()
            );
            Ok(())
        }
        Command::Density(args) => {
            let cfg = config::single_city(g.config.as_deref(), &args_to_city(&args), &overrides)?;
            let inputs = load_inputs(&cfg)?;
            let (real, uniform, delta) = density_fields(&inputs, cfg.bandwidth_m, cfg.cell_m)?;
            let proj = inputs.boundary.projection;
            let dir = out_dir(g)?;
            write_out(Some(&dir), "c_real.json", &real.to_json(&proj))?;
            write_out(Some(&dir), "c_uniform.json", &uniform.to_json(&proj))?;
            write_out(Some(&dir), "c_delta.json", &delta.to_json(&proj))?;
            write_out(
                Some(&dir),
                "c_delta.geojson",
                &export_delta_geojson(&delta, &proj, Some(&inputs.boundary.polygon))?,
            )?;
            write_out(Some(&dir), "c_delta.svg", &export_svg_choropleth(&delta)?)
        }
        Command::Compare(args) => {
            let cfg = config::single_city(g.config.as_deref(), &args_to_city(&args), &overrides)?;
            let inputs = load_inputs(&cfg)?;
            let prior = uniform_road_samples(&inputs.net)?;
            let d = compare_samples(&panorama_samples(&inputs.panos), &prior, &cfg.kl, &cfg.sinkhorn)?;
            if !d.emd_converged {
                warn!("Sinkhorn stopped at max_iters; dual gap {:e}", d.emd_dual_gap);
            }
            write_out(
                g.out.as_deref(),
                "distances.json",
                &(serde_json::to_string_pretty(&d)? + "\n"),
            )
        }
        Command::Coverage(args) => {
            let cfg = config::single_city(g.config.as_deref(), &args_to_city(&args), &overrides)?;
            let inputs = load_inputs(&cfg)?;
            let c = coverage_percent(&inputs.net, &inputs.panos, cfg.coverage_threshold_m)?;
            let text = format!(
                "city,provider,road_class,threshold_m,n_road_points,n_covered,coverage_pct\n{},{},{},{},{},{},{:.3}\n",
                cfg.city,
                cfg.provider.code(),
                cfg.road_class.label(),
                c.threshold,
                c.n_road_points,
                c.n_covered,
                100.0 * c.covered_fraction
            );
            write_out(g.out.as_deref(), "coverage.csv", &text)
        }
        Command::Manova(args) => {
            let cfg = config::single_city(g.config.as_deref(), &args_to_city(&args), &overrides)?;
            let inputs = load_inputs(&cfg)?;
            let prior = uniform_road_samples(&inputs.net)?;
            let panos: Vec<Point<f64>> = inputs.panos.points();
            let m = manova_two_group_named(&panos, "panoramas", prior.points(), "road prior")?;
            let text = format!(
                "{}\n{}\n",
                ManovaResult::<f64>::CSV_HEADER,
                m.csv_row(&cfg.city, cfg.provider.code())
            );
            write_out(g.out.as_deref(), "manova.csv", &text)
        }
        Command::Simulate {
            nx,
            ny,
            block_m,
            policy,
            passes,
            center_m,
            p_obstruct,
            interval_m,
            random_phase,
        } => {
            let seed = g.seed.unwrap_or(0);
            let city = gen_city(nx, ny, block_m, seed)?;
            let policy = match policy {
                PolicyArg::Uniform => DriverPolicy::Uniform { passes },
                PolicyArg::CenterBiased => DriverPolicy::CenterBiased {
                    factor: passes,
                    center_region: city.center_square(center_m)?,
                },
                PolicyArg::Redrive => DriverPolicy::ObstructionRedrive { p_obstruct },
                PolicyArg::Territories => {
                    // West half once, east half `passes` times.
                    let (lo, hi) = city.extent();
                    let pad = 1.0 + block_m;
                    let rect = |a: (f64, f64), b: (f64, f64)| {
                        streetcov_core::Polygon::rect(Point::new(a.0, a.1), Point::new(b.0, b.1))
                    };
                    DriverPolicy::Territories {
                        regions: vec![
                            (rect((lo.x - pad, lo.y - pad), (0.0, hi.y + pad))?, 1),
                            (rect((0.0, lo.y - pad), (hi.x + pad, hi.y + pad))?, passes),
                        ],
                    }
                }
            };
            let opts = SimOptions {
                pano_interval: interval_m,
                seed,
                phase: if random_phase { Phase::Random } else { Phase::Aligned },
            };
            let panos = simulate_drive_with(&city, &policy, &opts)?;
            let dir = out_dir(g)?;
            let paths = write_fixture(&city, &panos, &dir)?;
            let batch = BatchConfig::for_fixture("Synthetic", &paths, seed);
            write_out(
                Some(&dir),
                "config.json",
                &(serde_json::to_string_pretty(&batch)? + "\n"),
            )?;
            println!(
                "{} panoramas on {} streets ({:.0} m)",
                panos.len(),
                city.net.roads.len(),
                city.net.total_length()
            );
            Ok(())
        }
        Command::Rank { input } => {
            let text = read(&input)?;
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let mut rows = Vec::new();
            for rec in reader.deserialize::<ScoreRow>() {
                rows.push(rec.with_context(|| format!("reading {}", input.display()))?);
            }
            let table = rank_cities(&rows)?;
            write_out(g.out.as_deref(), "ranking.csv", &table.to_csv())
        }
        Command::Report => {
            let Some(path) = g.config.as_deref() else {
                bail!(InputError("report needs --config <path>".into()));
            };
            let batch = BatchConfig::load(path)?;
            let out = g
                .out
                .clone()
                .or_else(|| batch.out.clone())
                .ok_or_else(|| InputError("no output directory: pass --out or set `out` in the config".into()))?;
            let jobs = overrides.jobs.or(batch.jobs).unwrap_or(1);
            let cfgs = batch.city_configs(&out, &overrides)?;
            fs::create_dir_all(&out).map_err(|e| streetcov_core::Error::io(&out, e))?;
            let mut results: Vec<CityResult> = Vec::new();
            let mut first_err = None;
            for (cfg, r) in cfgs.iter().zip(run_batch(&cfgs, jobs)?) {
                match r {
                    Ok(rep) => {
                        println!(
                            "{} / {}: kl {:.4}, emd {:.6e}, coverage {:.1} %",
                            cfg.city,
                            cfg.provider.code(),
                            rep.result.distances.kl,
                            rep.result.distances.emd,
                            100.0 * rep.result.coverage.covered_fraction
                        );
                        results.push(rep.result);
                    }
                    Err(e) => {
                        eprintln!("error: {} / {}: {e}", cfg.city, cfg.provider.code());
                        first_err.get_or_insert(e);
                    }
                }
            }
            if !results.is_empty() {
                write_out(Some(&out), "ranking.csv", &ranking_of(&results)?.to_csv())?;
                write_out(Some(&out), "coverage.csv", &coverage_csv(&results))?;
                let mut manova = format!("{}\n", ManovaResult::<f64>::CSV_HEADER);
                for r in &results {
                    manova.push_str(&r.manova.csv_row(&r.city, r.provider.code()));
                    manova.push('\n');
                }
                write_out(Some(&out), "manova.csv", &manova)?;
            }
            match first_err {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
    }
}

fn args_to_city(a: &CityArgs) -> config::CityFlags {
    config::CityFlags {
        city: a.city.clone(),
        provider: a.provider.map(Into::into),
        boundary: a.boundary.clone(),
        roads: a.roads.clone(),
        panos: a.panos.clone(),
    }
}
