//! Labelled binary classification data, stratified splitting and the
//! TPR/TNR objectives.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Program, Semantics};

/// Feature rows with a boolean label per row (`true` = positive, the
/// minority class).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    feature_count: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let feature_count = rows.first().map_or(0, Vec::len);
        let names = (0..feature_count).map(|i| format!("x{i}")).collect();
        Self::from_parts(name.into(), names, rows, labels)
    }

    fn from_parts(name: String, feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Usage(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let feature_count = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * feature_count);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_count {
                return Err(Error::Usage(format!(
                    "row {i} has {} features, expected {feature_count}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            name,
            feature_names,
            feature_count,
            values,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.feature_count..(i + 1) * self.feature_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.feature_count);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: name.into(),
            feature_names: self.feature_names.clone(),
            feature_count: self.feature_count,
            values,
            labels,
        }
    }
}

/// Loads a CSV with a header row. Every column except `label_column` is a
/// real-valued feature; rows whose label equals `positive_label` are
/// positive.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let load_err = |reason: String| Error::Load {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| load_err(e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(load_err("file is empty".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| load_err(format!("no column named {label_column:?}")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut label_values = BTreeSet::new();
    for (r, record) in reader.records().enumerate() {
        // Header is line 1.
        let line = r + 2;
        let record = record.map_err(|e| load_err(format!("line {line}: {e}")))?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                load_err(format!(
                    "line {line}, column {} ({}): cannot parse {cell:?} as a number",
                    c + 1,
                    &headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(load_err(format!("line {line}, column {}: non-finite value", c + 1)));
            }
            row.push(v);
        }
        let label = &record[label_idx];
        label_values.insert(label.to_string());
        labels.push(label == positive_label);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(load_err("no data rows".into()));
    }
    if !label_values.contains(positive_label) {
        return Err(load_err(format!(
            "positive label {positive_label:?} never occurs (labels seen: {label_values:?})"
        )));
    }
    if label_values.len() > 2 {
        return Err(load_err(format!(
            "expected a binary label column, found values {label_values:?}"
        )));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let dataset = Dataset::from_parts(name, feature_names, rows, labels)?;
    if dataset.positive_count() > dataset.negative_count() {
        log::warn!(
            "{}: positive class is the majority ({} of {})",
            path.display(),
            dataset.positive_count(),
            dataset.len()
        );
    }
    Ok(dataset)
}

/// Splits each class in half after shuffling it; odd classes give the
/// extra example to the training half. Rows keep their original relative
/// order inside each half.
pub fn stratified_split<R: Rng + ?Sized>(d: &Dataset, rng: &mut R) -> Result<(Dataset, Dataset)> {
    let mut train = Vec::with_capacity(d.len() / 2 + 2);
    let mut test = Vec::with_capacity(d.len() / 2 + 2);
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::Split {
                dataset: d.name.clone(),
                reason: format!(
                    "{} class has {} example(s), need at least 2",
                    if class { "positive" } else { "negative" },
                    idx.len()
                ),
            });
        }
        idx.shuffle(rng);
        let n_train = idx.len().div_ceil(2);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        d.subset(&train, format!("{}-train", d.name)),
        d.subset(&test, format!("{}-test", d.name)),
    ))
}

/// Per-column min-max scaling fitted on one dataset and applied to others.
#[derive(Clone, Debug)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(d: &Dataset) -> Self {
        let mut min = vec![f64::INFINITY; d.feature_count];
        let mut max = vec![f64::NEG_INFINITY; d.feature_count];
        for row in d.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        Self { min, range }
    }

    /// Constant columns map to 0.
    pub fn transform(&self, d: &Dataset) -> Dataset {
        let mut out = d.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            let j = k % d.feature_count;
            *v = if self.range[j] > 0.0 {
                (*v - self.min[j]) / self.range[j]
            } else {
                0.0
            };
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_outputs(outputs: &[f64], labels: &[bool]) -> Self {
        debug_assert_eq!(outputs.len(), labels.len());
        let mut c = ConfusionCounts::default();
        for (&y, &positive) in outputs.iter().zip(labels) {
            match (is_positive(y), positive) {
                (true, true) => c.tp += 1,
                (false, true) => c.fn_ += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// True positive rate; 0 when the dataset has no positives.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// True negative rate; 0 when the dataset has no negatives.
    pub fn tnr(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Non-negative program output means the positive class.
#[inline]
pub fn is_positive(output: f64) -> bool {
    output >= 0.0
}

pub fn classify(program: &Program, row: &[f64]) -> Result<bool> {
    Ok(is_positive(program.evaluate(row)?))
}

pub fn confusion(program: &Program, d: &Dataset) -> Result<ConfusionCounts> {
    let sem = program.semantics(d)?;
    Ok(confusion_from_semantics(&sem, d))
}

pub fn confusion_from_semantics(sem: &Semantics, d: &Dataset) -> ConfusionCounts {
    ConfusionCounts::from_outputs(sem.values(), d.labels())
}

/// `(tpr, tnr)` of the program on `d`.
pub fn objectives(program: &Program, d: &Dataset) -> Result<(f64, f64)> {
    let c = confusion(program, d)?;
    Ok((c.tpr(), c.tnr()))
}

/// One entry of a dataset manifest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub label_column: String,
    pub positive_label: String,
}

impl DatasetEntry {
    pub fn load(&self) -> Result<Dataset> {
        let mut d = load_csv(&self.path, &self.label_column, &self.positive_label)?;
        d.name = self.name.clone();
        Ok(d)
    }
}

/// Maps dataset names to files and label conventions.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

impl DatasetManifest {
    /// Reads a TOML manifest. Relative dataset paths resolve against the
    /// manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for entry in &mut manifest.datasets {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        Ok(manifest)
    }

    pub fn get(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name.eq_ignore_ascii_case(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn synthetic(pos: usize, neg: usize) -> Dataset {
        let rows = (0..pos + neg).map(|i| vec![i as f64]).collect();
        let labels = (0..pos + neg).map(|i| i < pos).collect();
        Dataset::new("synthetic", rows, labels).unwrap()
    }

    #[test]
    fn loads_csv_with_label_column_anywhere() {
        let f = write_csv("a,label,b\n1.0,yes,2\n3,no,4.5\n-1,no,0\n");
        let d = load_csv(f.path(), "label", "yes").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_count(), 2);
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.row(1), &[3.0, 4.5]);
        assert_eq!(d.labels(), &[true, false, false]);
    }

    #[test]
    fn empty_file_is_a_load_error() {
        let f = write_csv("");
        assert!(matches!(load_csv(f.path(), "y", "1"), Err(Error::Load { .. })));
        let header_only = write_csv("a,y\n");
        assert!(matches!(
            load_csv(header_only.path(), "y", "1"),
            Err(Error::Load { .. })
        ));
    }

    #[test]
    fn parse_failure_reports_location() {
        let f = write_csv("a,b,y\n1,2,p\n3,oops,n\n");
        let msg = load_csv(f.path(), "y", "p").unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn unknown_labels_are_rejected() {
        let f = write_csv("a,y\n1,p\n2,n\n");
        assert!(load_csv(f.path(), "y", "q").is_err());
        let multi = write_csv("a,y\n1,p\n2,n\n3,m\n");
        assert!(load_csv(multi.path(), "y", "p").is_err());
        assert!(load_csv(f.path(), "missing", "p").is_err());
    }

    #[test]
    fn split_halves_each_class() {
        // Class sizes taken from the Yeast (mit) and Abalone-19 problems.
        for (pos, neg, train, train_pos, test, test_pos) in
            [(244, 1238, 741, 122, 741, 122), (32, 4145, 2089, 16, 2088, 16)]
        {
            let d = synthetic(pos, neg);
            let (tr, te) = stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            assert_eq!((tr.len(), tr.positive_count()), (train, train_pos));
            assert_eq!((te.len(), te.positive_count()), (test, test_pos));
        }
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let d = synthetic(13, 40);
        let (a1, b1) = stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (a2, b2) = stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let mut all: Vec<f64> = a1.rows().chain(b1.rows()).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..53).map(|i| i as f64).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn split_needs_two_per_class() {
        let d = synthetic(1, 10);
        assert!(matches!(
            stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Split { .. })
        ));
    }

    #[test]
    fn constant_classifiers() {
        let d = synthetic(5, 9);
        let always_pos: Program = "(% x0 x0)".parse().unwrap();
        let always_neg: Program = "(- (- x0 x0) (% x0 x0))".parse().unwrap();
        // Row 0 has x0 = 0, where protected division still yields 1.
        assert_eq!(objectives(&always_pos, &d).unwrap(), (1.0, 0.0));
        assert_eq!(objectives(&always_neg, &d).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn perfect_separator() {
        // Two clusters: positives at x0 >= 10, negatives at x0 <= 6.5.
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                if i < 6 {
                    vec![10.0 + i as f64, 1.0]
                } else {
                    vec![(i as f64 - 6.0) * 0.5, 1.0]
                }
            })
            .collect();
        let labels = (0..20).map(|i| i < 6).collect();
        let d = Dataset::new("clusters", rows, labels).unwrap();
        // x0 - 8, with the constant built from x1 = 1.
        let p: Program = "(- x0 (* (+ (+ x1 x1) (+ x1 x1)) (+ x1 x1)))".parse().unwrap();
        let c = confusion(&p, &d).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 6,
                tn: 14,
                fp: 0,
                fn_: 0
            }
        );
        assert_eq!((c.tpr(), c.tnr()), (1.0, 1.0));
        assert!(classify(&p, &[12.0, 1.0]).unwrap());
        assert!(!classify(&p, &[3.0, 1.0]).unwrap());
    }

    #[test]
    fn objectives_ignore_row_order() {
        let d = synthetic(7, 20);
        let p: Program = "(- x0 (* x0 x0))".parse().unwrap();
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.reverse();
        idx.swap(3, 17);
        let shuffled = d.subset(&idx, "perm");
        assert_eq!(objectives(&p, &d).unwrap(), objectives(&p, &shuffled).unwrap());
    }

    #[test]
    fn scaler_maps_to_unit_interval() {
        let d = Dataset::new(
            "s",
            vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![3.0, 5.0]],
            vec![true, false, true],
        )
        .unwrap();
        let s = MinMaxScaler::fit(&d).transform(&d);
        assert_eq!(s.row(0), &[0.0, 0.0]);
        assert_eq!(s.row(1), &[1.0, 0.0]);
        assert_eq!(s.row(2), &[0.5, 0.0]);
    }
}
