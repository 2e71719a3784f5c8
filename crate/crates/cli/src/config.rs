//! Run configuration files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use streetcov_core::ingest::{Provider, RoadClass};
use streetcov_core::report::CityRunConfig;
use streetcov_core::synth::FixturePaths;

/// Bad command-line usage or configuration (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// Top-level config file: shared output settings plus one entry per city.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub cities: Vec<CityRunConfig>,
}

/// Flag values applied on top of every city's config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub road_class: Option<RoadClass>,
    pub bandwidth_m: Option<f64>,
    pub cell_m: Option<f64>,
    pub blur: Option<f64>,
    pub k: Option<usize>,
    pub threshold_m: Option<f64>,
}

impl Overrides {
    #[allow(clippy::too_many_arguments)]
    pub fn from_flags(
        jobs: Option<usize>,
        seed: Option<u64>,
        road_class: Option<RoadClass>,
        bandwidth_m: Option<f64>,
        cell_m: Option<f64>,
        blur: Option<f64>,
        k: Option<usize>,
        threshold_m: Option<f64>,
    ) -> Self {
        Overrides {
            jobs,
            seed,
            road_class,
            bandwidth_m,
            cell_m,
            blur,
            k,
            threshold_m,
        }
    }

    pub fn apply(&self, cfg: &mut CityRunConfig) {
        if let Some(v) = self.jobs {
            cfg.jobs = v.max(1);
        }
        if let Some(v) = self.seed {
            cfg.sinkhorn.seed = v;
        }
        if let Some(v) = self.road_class {
            cfg.road_class = v;
        }
        if let Some(v) = self.bandwidth_m {
            cfg.bandwidth_m = v;
        }
        if let Some(v) = self.cell_m {
            cfg.cell_m = v;
        }
        if let Some(v) = self.blur {
            cfg.sinkhorn.blur = v;
        }
        if let Some(v) = self.k {
            cfg.kl.k = v;
        }
        if let Some(v) = self.threshold_m {
            cfg.coverage_threshold_m = v;
        }
    }
}

/// City inputs given directly as flags.
#[derive(Clone, Debug, Default)]
pub struct CityFlags {
    pub city: Option<String>,
    pub provider: Option<Provider>,
    pub boundary: Option<PathBuf>,
    pub roads: Option<PathBuf>,
    pub panos: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || p.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl BatchConfig {
    pub fn load(path: &Path) -> anyhow::Result<BatchConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| streetcov_core::Error::io(path, e))?;
        let mut cfg: BatchConfig =
            serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        if cfg.cities.is_empty() {
            return Err(InputError(format!("{}: no cities configured", path.display())).into());
        }
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.out = cfg.out.map(|o| resolve(base, &o));
        for c in &mut cfg.cities {
            c.boundary = resolve(base, &c.boundary);
            c.roads = resolve(base, &c.roads);
            for p in [&mut c.panos, &mut c.plan, &mut c.fixture].into_iter().flatten() {
                *p = resolve(base, p);
            }
        }
        Ok(cfg)
    }

    /// One config per city with overrides applied and `out` set to
    /// `<out>/<city>_<provider>`.
    pub fn city_configs(&self, out: &Path, overrides: &Overrides) -> anyhow::Result<Vec<CityRunConfig>> {
        let mut seen = std::collections::HashSet::new();
        self.cities
            .iter()
            .map(|c| {
                let mut c = c.clone();
                overrides.apply(&mut c);
                let dir = format!("{}_{}", slug(&c.city), c.provider.code());
                if !seen.insert(dir.clone()) {
                    return Err(InputError(format!("duplicate city/provider pair {} / {}", c.city, c.provider)).into());
                }
                c.out = out.join(dir);
                Ok(c)
            })
            .collect()
    }

    /// Config for a synthetic city written by `simulate`, with paths relative to the fixture directory.
    pub fn for_fixture(city: &str, paths: &FixturePaths, seed: u64) -> BatchConfig {
        let name = |p: &Path| PathBuf::from(p.file_name().expect("file path"));
        let mut c = CityRunConfig::new(
            city,
            Provider::Other,
            name(&paths.boundary),
            name(&paths.roads),
            name(&paths.panos),
        );
        c.bandwidth_m = 100.0;
        c.cell_m = 100.0;
        c.sinkhorn.seed = seed;
        c.sinkhorn.max_points = 2000;
        BatchConfig {
            out: None,
            jobs: None,
            cities: vec![c],
        }
    }
}

/// Lowercase ASCII letters and digits, other runs collapsed to `-`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    if trimmed.is_empty() {
        "city".into()
    } else {
        trimmed.into()
    }
}

/// The first city of `--config`, or one built from flags, with overrides applied.
pub fn single_city(config: Option<&Path>, flags: &CityFlags, overrides: &Overrides) -> anyhow::Result<CityRunConfig> {
    let mut cfg = match config {
        Some(path) => {
            let batch = BatchConfig::load(path)?;
            let mut cities = batch.cities.into_iter();
            let mut c = cities.next().expect("non-empty");
            if let Some(name) = &flags.city {
                c = std::iter::once(c)
                    .chain(cities)
                    .find(|x| &x.city == name)
                    .ok_or_else(|| InputError(format!("city `{name}` not in {}", path.display())))?;
            }
            c
        }
        None => {
            let need = |v: &Option<PathBuf>, flag: &str| {
                v.clone()
                    .ok_or_else(|| InputError(format!("missing --{flag} (or --config)")))
            };
            CityRunConfig::new(
                flags.city.clone().unwrap_or_else(|| "city".into()),
                flags.provider.unwrap_or(Provider::Other),
                need(&flags.boundary, "boundary")?,
                need(&flags.roads, "roads")?,
                need(&flags.panos, "panos")?,
            )
        }
    };
    overrides.apply(&mut cfg);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Los Angeles"), "los-angeles");
        assert_eq!(slug("São Paulo"), "s-o-paulo");
        assert_eq!(slug("  "), "city");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"cities":[{"city":"A","provider":"GSV","boundary":"b.geojson","roads":"/abs/r.osm","panos":"p.jsonl","bandwidth_m":150}]}"#,
        )
        .unwrap();
        let b = BatchConfig::load(&path).unwrap();
        let c = &b.cities[0];
        assert_eq!(c.boundary, dir.path().join("b.geojson"));
        assert_eq!(c.roads, PathBuf::from("/abs/r.osm"));
        assert_eq!(c.bandwidth_m, 150.0);
        let cfgs = b
            .city_configs(
                Path::new("/o"),
                &Overrides {
                    blur: Some(0.02),
                    ..Overrides::default()
                },
            )
            .unwrap();
        assert_eq!(cfgs[0].out, PathBuf::from("/o/a_GSV"));
        assert_eq!(cfgs[0].sinkhorn.blur, 0.02);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"cities":[], "colour": 1}"#).unwrap();
        assert!(BatchConfig::load(&path).is_err());
    }
}
