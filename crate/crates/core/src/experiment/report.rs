use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::read_run;
use super::sweep::CampaignManifest;
use crate::engine::{Algorithm, Method};
use crate::error::{Error, Result};
use crate::metrics::{accumulate_po_front, hypervolume_trapezoid, FrontSnapshot};
use crate::stats::{bonferroni_threshold, compare_samples, mean, payoff_matrix, std_dev, CellSamples, Outcome};

/// Family-wise significance level before correction.
pub const ALPHA: f64 = 0.05;

/// Average and accumulated-front hypervolume of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub method: Method,
    pub lbss: Option<f64>,
    pub ubss: Option<f64>,
    pub runs: usize,
    pub mean_hv: f64,
    pub std_hv: f64,
    pub po_front_hv: f64,
}

/// A semantic cell tested against the canonical cell of the same dataset
/// and algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub method: Method,
    pub lbss: Option<f64>,
    pub ubss: Option<f64>,
    pub mean_hv: f64,
    pub std_hv: f64,
    pub canonical_mean_hv: f64,
    pub p_value: f64,
    pub flag: Outcome,
}

/// Number of grid cells where `row` beats `column`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub row: Method,
    pub column: Method,
    pub wins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub method: Method,
    pub lbss: Option<f64>,
    pub ubss: Option<f64>,
    pub tpr: f64,
    pub tnr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportOutcome {
    /// True when some runs or cells were missing.
    pub partial: bool,
    pub missing: Vec<String>,
    pub threshold: f64,
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub payoff: Vec<PayoffRow>,
}

struct LoadedCell {
    dataset: String,
    algorithm: Algorithm,
    method: Method,
    samples: CellSamples,
    po_front: FrontSnapshot,
}

fn cell_name(dataset: &str, algorithm: Algorithm, method: Method, lbss: Option<f64>, ubss: Option<f64>) -> String {
    let mut s = format!("{dataset}/{algorithm}/{method}");
    if let Some(u) = ubss {
        s += &format!(" lbss={} ubss={u}", lbss.map_or("-".into(), |l| l.to_string()));
    }
    s
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Builds summary, comparison and payoff tables from a campaign manifest
/// and writes them (CSV and JSON) into `out_dir`, by default `report/`
/// next to the manifest. Missing runs or cells are listed and the report
/// is flagged partial rather than aborted.
pub fn report(manifest_path: impl AsRef<Path>, out_dir: Option<&Path>) -> Result<ReportOutcome> {
    let manifest_path = manifest_path.as_ref();
    let manifest = CampaignManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let out_dir: PathBuf = out_dir.map_or_else(|| base.join("report"), Path::to_path_buf);
    let threshold = bonferroni_threshold(ALPHA, manifest.expected_grid.len());
    let mut out = ReportOutcome {
        threshold,
        ..Default::default()
    };

    let mut cells = Vec::new();
    for c in &manifest.cells {
        let (lbss, ubss) = (c.bounds.and_then(|b| b.lbss), c.bounds.map(|b| b.ubss));
        let name = cell_name(&c.dataset, c.algorithm, c.method, lbss, ubss);
        let mut runs = Vec::new();
        for (r, file) in c.results.iter().enumerate() {
            if !base.join(file).exists() {
                out.missing.push(format!("{name} run {r}"));
                continue;
            }
            runs.push(read_run(&base.join(&c.dir), r)?);
        }
        if runs.is_empty() {
            continue;
        }
        let hv: Vec<f64> = runs.iter().map(|r| r.hv).collect();
        let po_front = accumulate_po_front(runs.iter().map(|r| &r.front));
        out.summary.push(SummaryRow {
            dataset: c.dataset.clone(),
            algorithm: c.algorithm,
            method: c.method,
            lbss,
            ubss,
            runs: runs.len(),
            mean_hv: mean(&hv),
            std_hv: std_dev(&hv),
            po_front_hv: hypervolume_trapezoid(&po_front),
        });
        cells.push(LoadedCell {
            dataset: c.dataset.clone(),
            algorithm: c.algorithm,
            method: c.method,
            samples: CellSamples {
                method: c.method,
                bounds: c.bounds,
                hv,
            },
            po_front,
        });
    }

    // Pairs in first-seen order.
    let mut groups: Vec<(String, Algorithm)> = Vec::new();
    for c in &cells {
        if !groups.iter().any(|(d, a)| *d == c.dataset && *a == c.algorithm) {
            groups.push((c.dataset.clone(), c.algorithm));
        }
    }
    for (dataset, algorithm) in &groups {
        let group: Vec<&LoadedCell> = cells
            .iter()
            .filter(|c| c.dataset == *dataset && c.algorithm == *algorithm)
            .collect();
        let canonical = group.iter().find(|c| c.method == Method::Canonical);
        match canonical {
            Some(base_cell) => {
                for c in group.iter().filter(|c| c.method != Method::Canonical) {
                    let cmp = compare_samples(&c.samples.hv, &base_cell.samples.hv, threshold)?;
                    out.comparisons.push(ComparisonRow {
                        dataset: dataset.clone(),
                        algorithm: *algorithm,
                        method: c.method,
                        lbss: c.samples.bounds.and_then(|b| b.lbss),
                        ubss: c.samples.bounds.map(|b| b.ubss),
                        mean_hv: cmp.mean_a,
                        std_hv: std_dev(&c.samples.hv),
                        canonical_mean_hv: cmp.mean_b,
                        p_value: cmp.p_value,
                        flag: cmp.outcome,
                    });
                }
            }
            None => out
                .missing
                .push(format!("{dataset}/{algorithm}/canonical (no comparisons)")),
        }
        let samples: Vec<CellSamples> = group.iter().map(|c| c.samples.clone()).collect();
        match payoff_matrix(&samples, &manifest.expected_grid, threshold) {
            Ok(p) => {
                for (r, row) in p.methods.iter().enumerate() {
                    for (c, col) in p.methods.iter().enumerate() {
                        if let Some(wins) = p.wins[r][c] {
                            out.payoff.push(PayoffRow {
                                dataset: dataset.clone(),
                                algorithm: *algorithm,
                                row: *row,
                                column: *col,
                                wins,
                            });
                        }
                    }
                }
            }
            Err(Error::Aggregation { missing }) => out.missing.extend(
                missing
                    .into_iter()
                    .map(|m| format!("{dataset}/{algorithm}/{m} (payoff skipped)")),
            ),
            Err(e) => return Err(e),
        }
    }
    out.partial = !out.missing.is_empty();
    for m in &out.missing {
        log::warn!("missing: {m}");
    }

    let fronts: Vec<FrontRow> = cells
        .iter()
        .flat_map(|c| {
            c.po_front.points().iter().map(move |&(tpr, tnr)| FrontRow {
                dataset: c.dataset.clone(),
                algorithm: c.algorithm,
                method: c.method,
                lbss: c.samples.bounds.and_then(|b| b.lbss),
                ubss: c.samples.bounds.map(|b| b.ubss),
                tpr,
                tnr,
            })
        })
        .collect();

    fs::create_dir_all(&out_dir)?;
    write_csv(&out_dir.join("summary.csv"), &out.summary)?;
    write_csv(&out_dir.join("comparisons.csv"), &out.comparisons)?;
    write_csv(&out_dir.join("payoff.csv"), &out.payoff)?;
    write_csv(&out_dir.join("fronts.csv"), &fronts)?;
    let mut json = serde_json::to_vec_pretty(&out)?;
    json.push(b'\n');
    fs::write(out_dir.join("report.json"), json)?;
    Ok(out)
}
