use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DatasetSpec, ExperimentConfig, OUTPUT_DIR_ENV};
use super::runner::{execute, result_path, ExecutionSummary, PreparedCell};
use crate::engine::{Algorithm, Method};
use crate::error::{Error, Result};
use crate::semantic::{SemanticBounds, LBSS_GRID, UBSS_GRID};
use crate::variation::VariationConfig;

/// One lbss grid value: a number, or the string `"none"` for the
/// lower-bound-free criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LbssEntry {
    Value(f64),
    Named(String),
}

impl LbssEntry {
    fn value(&self) -> Result<Option<f64>> {
        match self {
            LbssEntry::Value(v) => Ok(Some(*v)),
            LbssEntry::Named(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            LbssEntry::Named(s) => Err(Error::Config(format!(
                "lbss entry {s:?} is neither a number nor \"none\""
            ))),
        }
    }
}

fn all_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Nsga2, Algorithm::Spea2]
}
fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn paper_lbss() -> Vec<LbssEntry> {
    LBSS_GRID
        .iter()
        .map(|l| l.map_or(LbssEntry::Named("none".into()), LbssEntry::Value))
        .collect()
}
fn paper_ubss() -> Vec<f64> {
    UBSS_GRID.to_vec()
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
    PathBuf::from("campaign")
}

/// A campaign: datasets x algorithms x methods, with every semantic method
/// crossed with the lbss x ubss grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub datasets: Vec<String>,
    pub manifest: PathBuf,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "paper_lbss")]
    pub lbss: Vec<LbssEntry>,
    #[serde(default = "paper_ubss")]
    pub ubss: Vec<f64>,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn check_unique<T: std::fmt::Debug>(what: &str, items: &[T], key: impl Fn(&T) -> String) -> Result<()> {
    let mut seen = HashSet::new();
    for it in items {
        if !seen.insert(key(it)) {
            return Err(Error::Config(format!("duplicate {what} {it:?} in grid")));
        }
    }
    Ok(())
}

impl SweepGrid {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut g: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if g.manifest.is_relative() {
            g.manifest = base.join(&g.manifest);
        }
        if g.output_dir.is_relative() {
            g.output_dir = base.join(&g.output_dir);
        }
        Ok(g)
    }

    /// Reads a grid file, honouring the output-directory override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut g = Self::from_toml(&text, path.parent().unwrap_or_else(|| Path::new(".")))?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            g.output_dir = PathBuf::from(dir);
        }
        Ok(g)
    }

    /// The (lbss, ubss) cells each semantic method is run on, lbss-major.
    pub fn bounds_grid(&self) -> Result<Vec<SemanticBounds>> {
        let mut out = Vec::new();
        for l in &self.lbss {
            for &u in &self.ubss {
                out.push(SemanticBounds::new(l.value()?, u)?);
            }
        }
        Ok(out)
    }

    /// Every cell of the campaign, in deterministic order.
    pub fn cells(&self) -> Result<Vec<ExperimentConfig>> {
        check_unique("dataset", &self.datasets, |d| d.to_ascii_lowercase())?;
        check_unique("algorithm", &self.algorithms, |a| a.to_string())?;
        check_unique("method", &self.methods, |m| m.to_string())?;
        check_unique("lbss", &self.lbss, |l| format!("{:?}", l.value().ok().flatten()))?;
        check_unique("ubss", &self.ubss, |u| u.to_string())?;
        if self.datasets.is_empty() || self.algorithms.is_empty() || self.methods.is_empty() {
            return Err(Error::Config(
                "grid needs at least one dataset, algorithm and method".into(),
            ));
        }
        let grid = self.bounds_grid()?;
        let mut cells = Vec::new();
        for dataset in &self.datasets {
            for &algorithm in &self.algorithms {
                for &method in &self.methods {
                    let bounds: Vec<Option<SemanticBounds>> = if method.needs_bounds() {
                        if grid.is_empty() {
                            return Err(Error::Config(format!(
                                "method {method} needs a non-empty lbss/ubss grid"
                            )));
                        }
                        grid.iter().copied().map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for b in bounds {
                        let mut spec = DatasetSpec::named(dataset, &self.manifest);
                        spec.normalize = self.normalize;
                        let mut c = ExperimentConfig::new(spec, algorithm, method, b);
                        c.population = self.population;
                        c.generations = self.generations;
                        c.runs = self.runs;
                        c.base_seed = self.base_seed;
                        c.variation = self.variation.clone();
                        c.output_dir = self.output_dir.join(cell_dir(dataset, algorithm, method, b.as_ref()));
                        c.validate()?;
                        cells.push(c);
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Relative directory of a cell, e.g. `Ion/nsga2/sdo/lbss-none_ubss-0.5`.
pub fn cell_dir(dataset: &str, algorithm: Algorithm, method: Method, bounds: Option<&SemanticBounds>) -> PathBuf {
    let mut p = PathBuf::from(dataset)
        .join(algorithm.to_string())
        .join(method.to_string());
    if let Some(b) = bounds {
        let lbss = b.lbss.map_or("none".to_string(), |l| l.to_string());
        p.push(format!("lbss-{lbss}_ubss-{}", b.ubss));
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SemanticBounds>,
    /// Cell directory, relative to the manifest.
    pub dir: PathBuf,
    /// Result files, relative to the manifest.
    pub results: Vec<PathBuf>,
}

/// Links every cell of a campaign to its result files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub runs: usize,
    pub base_seed: u64,
    /// The (lbss, ubss) grid each semantic method is expected to cover.
    pub expected_grid: Vec<SemanticBounds>,
    pub cells: Vec<ManifestCell>,
}

impl CampaignManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn build(grid: &SweepGrid) -> Result<Self> {
        let cells = grid
            .cells()?
            .into_iter()
            .map(|c| {
                let dataset = c.dataset.name.clone().unwrap_or_default();
                let dir = cell_dir(&dataset, c.algorithm, c.method, c.bounds.as_ref());
                ManifestCell {
                    results: (0..c.runs).map(|r| result_path(&dir, r)).collect(),
                    dataset,
                    algorithm: c.algorithm,
                    method: c.method,
                    bounds: c.bounds,
                    dir,
                }
            })
            .collect();
        Ok(Self {
            runs: grid.runs,
            base_seed: grid.base_seed,
            expected_grid: grid.bounds_grid()?,
            cells,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        fs::write(path, json)?;
        Ok(())
    }
}

pub struct SweepOutcome {
    pub manifest_path: PathBuf,
    pub manifest: CampaignManifest,
    pub summary: ExecutionSummary,
}

/// Expands the grid, loads every dataset, writes the manifest and then
/// runs (or resumes) all cells.
pub fn sweep(grid: &SweepGrid, jobs: usize) -> Result<SweepOutcome> {
    let manifest = CampaignManifest::build(grid)?;
    let prepared = grid
        .cells()?
        .into_iter()
        .map(PreparedCell::prepare)
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&grid.output_dir)?;
    let manifest_path = grid.output_dir.join(CampaignManifest::FILE_NAME);
    manifest.save(&manifest_path)?;
    log::info!(
        "{} cells x {} runs -> {}",
        manifest.cells.len(),
        grid.runs,
        manifest_path.display()
    );
    let summary = execute(&prepared, jobs)?;
    Ok(SweepOutcome {
        manifest_path,
        manifest,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(extra: &str) -> SweepGrid {
        SweepGrid::from_toml(
            &format!("datasets = [\"Ion\"]\nmanifest = \"d.toml\"\n{extra}"),
            Path::new("/x"),
        )
        .unwrap()
    }

    #[test]
    fn paper_grid_has_49_cells_per_dataset_and_algorithm() {
        let g = grid("algorithms = [\"nsga2\"]\nmethods = [\"canonical\", \"ssc\", \"sdo\", \"psdo\"]\n");
        let cells = g.cells().unwrap();
        assert_eq!(cells.len(), 3 * 16 + 1);
        assert_eq!(cells.iter().filter(|c| c.bounds.is_none()).count(), 1);
        assert_eq!(
            CampaignManifest::build(&g).unwrap().expected_grid,
            SemanticBounds::paper_grid()
        );
    }

    #[test]
    fn full_campaign_size() {
        let mut g = grid("");
        g.datasets = ["Ion", "Spect", "Yeast1", "Yeast2", "Abal1", "Abal2"]
            .map(String::from)
            .to_vec();
        let cells = g.cells().unwrap();
        assert_eq!(cells.len(), 2 * 6 * 49);
        assert_eq!(cells.len() * g.runs, 29_400);
    }

    #[test]
    fn canonical_only() {
        let cells = grid("methods = [\"canonical\"]\nalgorithms = [\"spea2\"]\n")
            .cells()
            .unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].bounds, None);
        assert_eq!(cells[0].output_dir, Path::new("/x/campaign/Ion/spea2/canonical"));
    }

    #[test]
    fn duplicates_are_rejected() {
        for extra in [
            "methods = [\"sdo\", \"sdo\"]\n",
            "ubss = [0.5, 0.5]\n",
            "lbss = [\"none\", 0.1, \"none\"]\n",
            "algorithms = [\"nsga2\", \"nsga2\"]\n",
        ] {
            assert!(matches!(grid(extra).cells(), Err(Error::Config(_))), "{extra}");
        }
        let mut g = grid("");
        g.datasets.push("ion".into());
        assert!(g.cells().is_err());
        assert!(grid("lbss = [\"zero\"]\n").cells().is_err());
    }

    #[test]
    fn cell_dirs_are_distinct() {
        let cells = grid("").cells().unwrap();
        let dirs: HashSet<_> = cells.iter().map(|c| c.output_dir.clone()).collect();
        assert_eq!(dirs.len(), cells.len());
        assert_eq!(
            cell_dir(
                "Ion",
                Algorithm::Nsga2,
                Method::Sdo,
                Some(&SemanticBounds { lbss: None, ubss: 0.5 })
            ),
            Path::new("Ion/nsga2/sdo/lbss-none_ubss-0.5")
        );
    }
}
