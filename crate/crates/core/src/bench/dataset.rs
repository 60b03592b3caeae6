use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BenchError;

/// Labeled patterns stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, BenchError> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(BenchError::InvalidConfig(format!(
                "{} feature values for {} patterns of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::InvalidConfig("non-finite feature".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(BenchError::InvalidConfig(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        Ok(Self {
            features,
            dim,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn pattern(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// The patterns at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.pattern(i));
        }
        Dataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Rescales every column to zero mean and unit population variance.
    /// Constant columns are only centered.
    pub fn standardize(&mut self) {
        let p = self.len() as f64;
        for d in 0..self.dim {
            let col = || self.features.iter().skip(d).step_by(self.dim);
            let mean = col().sum::<f64>() / p;
            let var = col().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p;
            let scale = if var > 0.0 { var.sqrt().recip() } else { 1.0 };
            for v in self.features.iter_mut().skip(d).step_by(self.dim) {
                *v = (*v - mean) * scale;
            }
        }
    }

    /// Comma-separated rows with the label last.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            for v in self.pattern(i) {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", self.labels[i]));
        }
        out
    }
}

/// Reads a headerless CSV file whose last column is an integer class label.
/// Features are standardized over the whole file and labels remapped to
/// `0..L` in ascending order of their raw values.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, BenchError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(file)
}

pub fn parse_dataset(reader: impl Read) -> Result<Dataset, BenchError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = None;
    for record in rdr.records() {
        let record = record.map_err(|e| BenchError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |reason: String| BenchError::Parse { line, reason };
        if record.len() < 2 {
            return Err(parse_err("need at least one feature and a label".into()));
        }
        let d = record.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(parse_err(format!(
                "expected {} features, found {d}",
                dim.unwrap()
            )));
        }
        for (col, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(format!(
                    "non-numeric feature {cell:?} in column {}",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "non-finite feature in column {}",
                    col + 1
                )));
            }
            features.push(v);
        }
        let label = &record[d];
        let label: i64 = label
            .parse()
            .map_err(|_| parse_err(format!("label {label:?} is not an integer")))?;
        raw_labels.push(label);
    }
    let dim = dim.ok_or_else(|| BenchError::Parse {
        line: 0,
        reason: "empty file".into(),
    })?;
    let mapping: BTreeMap<i64, usize> = {
        let mut distinct: Vec<i64> = raw_labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect()
    };
    if mapping.len() < 2 {
        return Err(BenchError::SingleClass);
    }
    let labels = raw_labels.iter().map(|l| mapping[l]).collect();
    let mut ds = Dataset::new(features, dim, labels, mapping.len())?;
    ds.standardize();
    Ok(ds)
}

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.5,
            val_frac: 0.25,
            test_frac: 0.25,
            seed: 0,
        }
    }
}

/// Shuffled `(train, validation, test)` pattern indices. Validation and
/// test sizes round down; the remainder goes to training.
pub fn split_indices(n_patterns: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3], BenchError> {
    let fracs = [spec.train_frac, spec.val_frac, spec.test_frac];
    if fracs.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(BenchError::InvalidSplit(
            "fractions must be positive".into(),
        ));
    }
    if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(BenchError::InvalidSplit("fractions must sum to 1".into()));
    }
    let n_val = (n_patterns as f64 * spec.val_frac).floor() as usize;
    let n_test = (n_patterns as f64 * spec.test_frac).floor() as usize;
    let n_train = n_patterns.saturating_sub(n_val + n_test);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(BenchError::InvalidSplit(format!(
            "{n_patterns} patterns give an empty partition ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..n_patterns).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok([order, val, test])
}

pub fn split(
    dataset: &Dataset,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset, Dataset), BenchError> {
    let [train, val, test] = split_indices(dataset.len(), spec)?;
    Ok((
        dataset.subset(&train),
        dataset.subset(&val),
        dataset.subset(&test),
    ))
}

/// Two isotropic unit-variance Gaussian classes in `dim` dimensions whose
/// means lie `separation` apart along the diagonal. Patterns alternate
/// between the classes.
pub fn two_blobs(n_patterns: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = 0.5 * separation / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(n_patterns * dim);
    let mut labels = Vec::with_capacity(n_patterns);
    for i in 0..n_patterns {
        let label = i % 2;
        let sign = if label == 0 { -1.0 } else { 1.0 };
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(sign * offset + z);
        }
        labels.push(label);
    }
    Dataset {
        features,
        dim,
        labels,
        n_classes: 2,
    }
}
