use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetEntry, DatasetManifest};
use crate::engine::{Algorithm, EngineConfig, Method};
use crate::error::{Error, Result};
use crate::semantic::SemanticBounds;
use crate::variation::VariationConfig;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "MOGP_OUTPUT_DIR";

/// Where the data comes from: either a named manifest entry or a direct
/// CSV path with its label convention.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
    /// Min-max scale features, fitted on each run's training half.
    #[serde(default)]
    pub normalize: bool,
}

impl DatasetSpec {
    pub fn named(name: &str, manifest: impl Into<PathBuf>) -> Self {
        Self {
            name: Some(name.to_string()),
            manifest: Some(manifest.into()),
            ..Self::default()
        }
    }

    pub fn entry(&self) -> Result<DatasetEntry> {
        if let Some(path) = &self.path {
            let (Some(label_column), Some(positive_label)) = (&self.label_column, &self.positive_label) else {
                return Err(Error::Config(
                    "dataset.path needs label_column and positive_label".into(),
                ));
            };
            let name = self.name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map_or("data".into(), |s| s.to_string_lossy().into_owned())
            });
            return Ok(DatasetEntry {
                name,
                path: path.clone(),
                label_column: label_column.clone(),
                positive_label: positive_label.clone(),
            });
        }
        let (Some(name), Some(manifest)) = (&self.name, &self.manifest) else {
            return Err(Error::Config("dataset needs either path or name + manifest".into()));
        };
        let m = DatasetManifest::load(manifest)?;
        let mut entry = m
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("dataset {name:?} not in {}", manifest.display())))?;
        if let Some(col) = &self.label_column {
            entry.label_column = col.clone();
        }
        if let Some(pos) = &self.positive_label {
            entry.positive_label = pos.clone();
        }
        Ok(entry)
    }

    pub fn load(&self) -> Result<Dataset> {
        self.entry()?.load()
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.manifest, &mut self.path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn default_population() -> usize {
    500
}
fn default_generations() -> usize {
    50
}
fn default_runs() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment cell: a dataset, an algorithm, a method and its bounds,
/// repeated for `runs` seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub algorithm: Algorithm,
    #[serde(default = "canonical")]
    pub method: Method,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SemanticBounds>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn canonical() -> Method {
    Method::Canonical
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, algorithm: Algorithm, method: Method, bounds: Option<SemanticBounds>) -> Self {
        Self {
            dataset,
            algorithm,
            method,
            population: default_population(),
            generations: default_generations(),
            runs: default_runs(),
            base_seed: 0,
            variation: VariationConfig::default(),
            bounds,
            output_dir: default_output_dir(),
        }
    }

    /// Parses TOML text; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.dataset.resolve(base);
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the output-directory override from
    /// the environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut cfg = Self::from_toml(&text, base)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.engine_config().validate()
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            population: self.population,
            method: self.method,
            bounds: self.bounds,
            variation: self.variation.clone(),
        }
    }

    /// Seed of run `run_index`.
    pub fn seed(&self, run_index: usize) -> u64 {
        self.base_seed.wrapping_add(run_index as u64)
    }

    /// Short human-readable cell name, e.g. `Ion/nsga2/sdo lbss=- ubss=0.5`.
    pub fn label(&self) -> String {
        let stem = self
            .dataset
            .path
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy());
        let name = self
            .dataset
            .name
            .as_deref()
            .map(Into::into)
            .or(stem)
            .unwrap_or("data".into());
        match &self.bounds {
            None => format!("{name}/{}/{}", self.algorithm, self.method),
            Some(b) => format!(
                "{name}/{}/{} lbss={} ubss={}",
                self.algorithm,
                self.method,
                b.lbss.map_or("-".into(), |l| l.to_string()),
                b.ubss
            ),
        }
    }
}
