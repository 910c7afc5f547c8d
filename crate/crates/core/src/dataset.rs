//! Tabular binary-labelled data in the unit hypercube.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `n` rows of `p` values, each in `[0,1]`.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    /// Original `(min, max)` per feature, for mapping back to raw units.
    pub scaling: Vec<(f64, f64)>,
}

impl Dataset {
    /// Wraps already-scaled data; checks shapes and the unit-box invariant.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        let scaling = vec![(0.0, 1.0); p];
        let d = Self {
            features,
            labels,
            feature_names,
            scaling,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_default_names(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let p = features.first().map_or(0, Vec::len);
        Self::new(features, labels, default_names(p))
    }

    fn validate(&self) -> Result<()> {
        let p = self.feature_names.len();
        if self.features.len() != self.labels.len() {
            return Err(Error::Shape {
                expected: self.features.len(),
                actual: self.labels.len(),
            });
        }
        for (r, row) in self.features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Shape {
                    expected: p,
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Parse {
                    row: r,
                    column: self.feature_names[j].clone(),
                    message: format!("value {} outside [0,1]", row[j]),
                });
            }
        }
        if let Some(r) = self.labels.iter().position(|&y| y > 1) {
            return Err(Error::Parse {
                row: r,
                column: "label".into(),
                message: "labels must be 0 or 1".into(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.len() - ones, ones]
    }

    pub fn has_both_classes(&self) -> bool {
        let [a, b] = self.class_counts();
        a > 0 && b > 0
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            scaling: self.scaling.clone(),
        }
    }

    /// Maps a scaled row back to the original units.
    pub fn unscale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scaling)
            .map(|(&v, &(lo, hi))| lo + v * (hi - lo))
            .collect()
    }

    pub fn scale(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.scaling)
            .map(|(&v, &(lo, hi))| scale_value(v, lo, hi))
            .collect()
    }

    /// Seeded 70/15/15 partition; see [`SplitSpec`].
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
        let (a, b, c) = spec.partition(self.len())?;
        Ok((self.subset(&a), self.subset(&b), self.subset(&c)))
    }
}

fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("f{j}")).collect()
}

fn scale_value(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Reads a headered, comma-delimited CSV; every column except
/// `label_column` is a numeric feature and gets min-max scaled to `[0,1]`.
/// Constant columns scale to `0.0`.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let label_cell = record.get(label_idx).unwrap_or("");
        let label = match label_cell {
            "0" | "0.0" | "false" => 0,
            "1" | "1.0" | "true" => 1,
            "" => {
                return Err(Error::Parse {
                    row,
                    column: label_column.into(),
                    message: "missing label".into(),
                })
            }
            other => {
                return Err(Error::Parse {
                    row,
                    column: label_column.into(),
                    message: format!("label `{other}` is not binary"),
                })
            }
        };
        let values = feature_cols
            .iter()
            .map(|&c| {
                let cell = record.get(c).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: headers[c].to_string(),
                        message: format!("`{cell}` is not a number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        raw.push(values);
        labels.push(label);
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let p = feature_names.len();
    let scaling: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                (lo.min(row[j]), hi.max(row[j]))
            })
        })
        .collect();
    let features = raw
        .iter()
        .map(|row| {
            row.iter()
                .zip(&scaling)
                .map(|(&v, &(lo, hi))| scale_value(v, lo, hi))
                .collect()
        })
        .collect();
    Ok(Dataset {
        features,
        labels,
        feature_names,
        scaling,
    })
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub const MIN_ROWS: usize = 10;

    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.70,
            validation_fraction: 0.15,
            test_fraction: 0.15,
            seed,
        }
    }

    /// Part sizes by largest-remainder rounding (ties go to the earlier part).
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        let fractions = [self.train_fraction, self.validation_fraction, self.test_fraction];
        let total: f64 = fractions.iter().sum();
        if fractions.iter().any(|f| *f < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must be non-negative and sum to 1, got {fractions:?}")));
        }
        let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
        let mut sizes = [0usize; 3];
        for (s, e) in sizes.iter_mut().zip(&exact) {
            *s = e.floor() as usize;
        }
        let mut leftover = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            sizes[k] += 1;
            leftover -= 1;
        }
        Ok(sizes)
    }

    /// Row indices for each part, after a seeded shuffle.
    pub fn partition(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        if n < Self::MIN_ROWS {
            return Err(Error::TooFewRows {
                needed: Self::MIN_ROWS,
                got: n,
            });
        }
        let [a, b, _] = self.sizes(n)?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::stream(self.seed, "split"));
        let test = idx.split_off(a + b);
        let validation = idx.split_off(a);
        Ok((idx, validation, test))
    }
}

/// Oversamples the minority class until both classes have the majority's
/// count. Each synthetic row is `a + u·(b − a)` for a random minority row
/// `a`, one of its `k` nearest minority neighbours `b`, and `u ~ U[0,1)`.
pub fn smote_oversample(train: &Dataset, k_neighbors: usize, seed_value: u64) -> Result<Dataset> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let counts = train.class_counts();
    if counts[0] == counts[1] {
        return Ok(train.clone());
    }
    let minority_label = if counts[0] < counts[1] { 0u8 } else { 1u8 };
    let minority: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == minority_label).collect();
    let deficit = counts[1 - minority_label as usize] - minority.len();

    let mut k = k_neighbors.max(1);
    if minority.len() <= k {
        let reduced = minority.len().saturating_sub(1);
        log::warn!("SMOTE: {} minority rows, reducing k from {k} to {reduced}", minority.len());
        k = reduced;
    }

    // k nearest minority neighbours of every minority row (brute force)
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (sq_dist(&train.features[i], &train.features[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = seed::stream(seed_value, "smote");
    let mut out = train.clone();
    for _ in 0..deficit {
        let m = rng.random_range(0..minority.len());
        let a = &train.features[minority[m]];
        let row = if neighbours[m].is_empty() {
            a.clone()
        } else {
            let b = &train.features[neighbours[m][rng.random_range(0..neighbours[m].len())]];
            let u: f64 = rng.random();
            a.iter()
                .zip(b)
                .map(|(&ai, &bi)| (ai + u * (bi - ai)).clamp(0.0, 1.0))
                .collect()
        };
        out.features.push(row);
        out.labels.push(minority_label);
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Class 1 iff `x₀ + x₁ > 1`.
    Linear,
    /// Class 1 iff `(x₀, x₁)` lies within 0.3 of `(0.5, 0.5)`.
    Radial,
    /// Class 1 iff exactly one of `x₀ > 0.5`, `x₁ > 0.5` holds.
    Xor,
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "radial" => Ok(Self::Radial),
            "xor" => Ok(Self::Xor),
            other => Err(Error::Config(format!("unknown boundary kind `{other}`"))),
        }
    }
}

impl BoundaryKind {
    pub fn label(self, x: &[f64]) -> u8 {
        let (a, b) = (x[0], x[1]);
        let positive = match self {
            BoundaryKind::Linear => a + b > 1.0,
            BoundaryKind::Radial => ((a - 0.5).powi(2) + (b - 0.5).powi(2)).sqrt() < 0.3,
            BoundaryKind::Xor => (a > 0.5) != (b > 0.5),
        };
        positive as u8
    }
}

/// Uniform points in `[0,1]^p` labelled by a known boundary over the first
/// two coordinates; the remaining coordinates are noise.
pub fn synth_boundary(kind: BoundaryKind, n: usize, p: usize, seed_value: u64) -> Result<Dataset> {
    if n < 20 {
        return Err(Error::TooFewRows { needed: 20, got: n });
    }
    if p < 2 {
        return Err(Error::Config(format!("synthetic boundaries need p >= 2, got {p}")));
    }
    let mut rng = seed::stream(seed_value, "synth");
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
    let labels = features.iter().map(|x| kind.label(x)).collect();
    Dataset::with_default_names(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn min_max_endpoints() {
        let f = write_csv("a,y\n10,0\n30,1\n");
        let d = load_csv(f.path(), "y").unwrap();
        assert_eq!(d.features, vec![vec![0.0], vec![1.0]]);
        assert_eq!(d.scaling, vec![(10.0, 30.0)]);
    }

    #[test]
    fn three_rows_scale_to_thirds() {
        let f = write_csv("a,b,y\n10,5,0\n20,5,1\n30,5,0\n");
        let d = load_csv(f.path(), "y").unwrap();
        let col: Vec<f64> = d.features.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        // constant column
        assert!(d.features.iter().all(|r| r[1] == 0.0));
        assert_eq!(d.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn bad_cells_report_location() {
        let f = write_csv("a,y\n1,0\nx,1\n");
        match load_csv(f.path(), "y") {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_csv("a,y\n1,0\n2,\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::new(0);
        assert_eq!(spec.sizes(100).unwrap(), [70, 15, 15]);
        assert_eq!(spec.sizes(101).unwrap(), [71, 15, 15]);
        assert!(spec.partition(9).is_err());
    }

    #[test]
    fn split_is_deterministic_disjoint_and_exhaustive() {
        let spec = SplitSpec::new(42);
        let a = spec.partition(57).unwrap();
        assert_eq!(a, spec.partition(57).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn smote_balances_ten_to_three() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            features.push(vec![0.05 * i as f64, 0.9]);
            labels.push(0);
        }
        for i in 0..3 {
            features.push(vec![0.3 + 0.2 * i as f64, 0.1 * i as f64]);
            labels.push(1);
        }
        let d = Dataset::with_default_names(features, labels).unwrap();
        let out = smote_oversample(&d, 5, 1).unwrap();
        assert_eq!(out.class_counts(), [10, 10]);
    }

    #[test]
    fn smote_on_diagonal_stays_on_diagonal() {
        let d = Dataset::with_default_names(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.2, 0.8], vec![0.3, 0.6], vec![0.6, 0.1]],
            vec![1, 1, 0, 0, 0],
        )
        .unwrap();
        let out = smote_oversample(&d, 1, 3).unwrap();
        for row in &out.features[5..] {
            assert_eq!(row[0], row[1]);
        }
    }

    #[test]
    fn smote_leaves_balanced_data_alone() {
        let d = synth_boundary(BoundaryKind::Linear, 20, 2, 0).unwrap();
        let mut balanced = d.clone();
        let [a, b] = d.class_counts();
        let keep = a.min(b);
        let zeros: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == 0).take(keep).collect();
        let ones: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == 1).take(keep).collect();
        balanced = balanced.subset(&[zeros, ones].concat());
        assert_eq!(smote_oversample(&balanced, 5, 0).unwrap(), balanced);
    }

    #[test]
    fn synthetic_labels_follow_the_boundary() {
        let d = synth_boundary(BoundaryKind::Linear, 200, 3, 5).unwrap();
        for (x, &y) in d.features.iter().zip(&d.labels) {
            assert_eq!(y, u8::from(x[0] + x[1] > 1.0));
        }
        let r = synth_boundary(BoundaryKind::Radial, 200, 2, 5).unwrap();
        for (x, &y) in r.features.iter().zip(&r.labels) {
            let inside = (x[0] - 0.5).hypot(x[1] - 0.5) < 0.3;
            assert_eq!(y, u8::from(inside));
        }
        assert_eq!(d, synth_boundary(BoundaryKind::Linear, 200, 3, 5).unwrap());
        assert!(synth_boundary(BoundaryKind::Xor, 10, 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn scaling_round_trips(raw in prop::collection::vec((-1e3f64..1e3, 0.0f64..1e3), 1..6)) {
            let scaling: Vec<(f64, f64)> = raw.iter().map(|&(lo, w)| (lo, lo + w + 1.0)).collect();
            let d = Dataset { features: vec![], labels: vec![], feature_names: default_names(scaling.len()), scaling: scaling.clone() };
            let x: Vec<f64> = scaling.iter().map(|&(lo, hi)| lo + 0.37 * (hi - lo)).collect();
            let back = d.unscale(&d.scale(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0) * 1e3);
            }
        }
    }
}
