//! Tabular datasets: CSV loading, partitioning, column permutation and
//! synthetic regression data.
//!
//! Features are stored column-major. The target is either a vector of class
//! indices `0..q` or a vector of real values. Everything downstream reads
//! features through [`FeatureRows`], so a shuffled view can stand in for the
//! original table without copying untouched columns.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, TAG_SPLIT, TAG_SYNTH};
use crate::scalar::{std_dev, Scalar};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty file or no data rows")]
    Empty,
    #[error("missing value at row {row}, column {col}")]
    MissingValue { row: usize, col: usize },
    #[error("non-numeric value {value:?} at row {row}, column {col}")]
    NonNumeric { row: usize, col: usize, value: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("classification target has a single class")]
    SingleClass,
    #[error("target column {0:?} not found")]
    TargetColumn(String),
    #[error("dataset has {rows} rows, at least {min} are required")]
    TooSmall { rows: usize, min: usize },
    #[error("stratified splitting requires a classification task")]
    StratifiedRegression,
    #[error("feature index {index} out of range for {width} features")]
    FeatureOutOfRange { index: usize, width: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("malformed dataset: {0}")]
    Shape(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[serde(alias = "cls")]
    Classification,
    #[serde(alias = "reg")]
    Regression,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cls" | "classification" => Ok(Task::Classification),
            "reg" | "regression" => Ok(Task::Regression),
            other => Err(format!("unknown task {other:?}, expected cls or reg")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

/// Target column, also used for model predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    Classes(Vec<usize>),
    Values(Vec<T>),
}

impl<T: Scalar> Target<T> {
    pub fn len(&self) -> usize {
        match self {
            Target::Classes(c) => c.len(),
            Target::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Target::Classes(_) => Task::Classification,
            Target::Values(_) => Task::Regression,
        }
    }

    pub fn as_classes(&self) -> Option<&[usize]> {
        match self {
            Target::Classes(c) => Some(c),
            Target::Values(_) => None,
        }
    }

    pub fn as_values(&self) -> Option<&[T]> {
        match self {
            Target::Values(v) => Some(v),
            Target::Classes(_) => None,
        }
    }

    /// Target as reals; class indices are cast.
    pub fn to_reals(&self) -> Vec<T> {
        match self {
            Target::Classes(c) => c.iter().map(|&k| T::of_usize(k)).collect(),
            Target::Values(v) => v.clone(),
        }
    }

    fn subset(&self, rows: &[usize]) -> Self {
        match self {
            Target::Classes(c) => Target::Classes(rows.iter().map(|&r| c[r]).collect()),
            Target::Values(v) => Target::Values(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Read access to a feature table by (row, feature).
pub trait FeatureRows<T>: Sync {
    fn n_rows(&self) -> usize;
    fn n_features(&self) -> usize;
    fn value(&self, row: usize, feature: usize) -> T;
}

/// Row-major feature rows, e.g. rows assembled by a caller for prediction.
pub struct RowMajor<'a, T>(pub &'a [Vec<T>]);

impl<T: Scalar> FeatureRows<T> for RowMajor<'_, T> {
    fn n_rows(&self) -> usize {
        self.0.len()
    }

    fn n_features(&self) -> usize {
        self.0.first().map_or(0, Vec::len)
    }

    fn value(&self, row: usize, feature: usize) -> T {
        self.0[row][feature]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    feature_names: Vec<String>,
    target_name: String,
    columns: Vec<Vec<T>>,
    target: Target<T>,
    class_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, checking shape and label invariants.
    ///
    /// `class_names` must be empty for regression and hold one name per class
    /// for classification.
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<Vec<T>>,
        target: Target<T>,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let rows = target.len();
        if rows == 0 || columns.is_empty() {
            return Err(DatasetError::Empty);
        }
        if feature_names.len() != columns.len() {
            return Err(DatasetError::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(DatasetError::Shape(format!(
                "column {i} has {} rows, target has {rows}",
                c.len()
            )));
        }
        match &target {
            Target::Classes(labels) => {
                if class_names.len() < 2 {
                    return Err(DatasetError::SingleClass);
                }
                if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
                    return Err(DatasetError::Shape(format!(
                        "class index {bad} with only {} classes",
                        class_names.len()
                    )));
                }
            }
            Target::Values(v) => {
                if !class_names.is_empty() {
                    return Err(DatasetError::Shape("class names given for a regression target".into()));
                }
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(DatasetError::NonFinite { row, col: columns.len() });
                }
            }
        }
        for (col, c) in columns.iter().enumerate() {
            if let Some(row) = c.iter().position(|x| !x.is_finite()) {
                return Err(DatasetError::NonFinite { row, col });
            }
        }
        Ok(Self {
            feature_names,
            target_name: "target".to_string(),
            columns,
            target,
            class_names,
        })
    }

    pub fn with_target_name(mut self, name: impl Into<String>) -> Self {
        self.target_name = name.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> Task {
        self.target.task()
    }

    /// Number of classes `q`; zero for regression.
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn column(&self, feature: usize) -> &[T] {
        &self.columns[feature]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn target(&self) -> &Target<T> {
        &self.target
    }

    /// Copy of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, DatasetError> {
        let n = self.n_rows();
        if let Some(&index) = rows.iter().find(|&&r| r >= n) {
            return Err(DatasetError::RowOutOfRange { index, rows: n });
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        Ok(Self {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            target: self.target.subset(rows),
            class_names: self.class_names.clone(),
        })
    }

    /// Copy restricted to the given feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self, DatasetError> {
        let w = self.n_features();
        if let Some(&index) = features.iter().find(|&&f| f >= w) {
            return Err(DatasetError::FeatureOutOfRange { index, width: w });
        }
        if features.is_empty() {
            return Err(DatasetError::Shape("no features selected".into()));
        }
        Ok(Self {
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            target_name: self.target_name.clone(),
            columns: features.iter().map(|&f| self.columns[f].clone()).collect(),
            target: self.target.clone(),
            class_names: self.class_names.clone(),
        })
    }

    /// Row indices grouped by class. Empty for regression.
    pub fn rows_by_class(&self) -> Vec<Vec<usize>> {
        match &self.target {
            Target::Classes(labels) => {
                let mut groups = vec![Vec::new(); self.class_count()];
                for (row, &c) in labels.iter().enumerate() {
                    groups[c].push(row);
                }
                groups
            }
            Target::Values(_) => Vec::new(),
        }
    }
}

impl<T: Scalar> FeatureRows<T> for Dataset<T> {
    fn n_rows(&self) -> usize {
        Dataset::n_rows(self)
    }

    fn n_features(&self) -> usize {
        Dataset::n_features(self)
    }

    fn value(&self, row: usize, feature: usize) -> T {
        self.columns[feature][row]
    }
}

/// A dataset with some columns replaced by independently permuted copies.
/// Untouched columns are read from the base dataset.
pub struct ShuffledView<'a, T> {
    base: &'a Dataset<T>,
    replaced: Vec<Option<Vec<T>>>,
}

impl<'a, T: Scalar> ShuffledView<'a, T> {
    /// Shuffles each listed column, visiting columns in the order given.
    pub fn new<R: Rng + ?Sized>(
        base: &'a Dataset<T>,
        columns: &[usize],
        rng: &mut R,
    ) -> Result<Self, DatasetError> {
        let w = base.n_features();
        let mut replaced = vec![None; w];
        for &col in columns {
            if col >= w {
                return Err(DatasetError::FeatureOutOfRange { index: col, width: w });
            }
            let mut values = base.columns[col].clone();
            values.shuffle(rng);
            replaced[col] = Some(values);
        }
        Ok(Self { base, replaced })
    }
}

impl<T: Scalar> FeatureRows<T> for ShuffledView<'_, T> {
    fn n_rows(&self) -> usize {
        self.base.n_rows()
    }

    fn n_features(&self) -> usize {
        self.base.n_features()
    }

    fn value(&self, row: usize, feature: usize) -> T {
        match &self.replaced[feature] {
            Some(col) => col[row],
            None => self.base.columns[feature][row],
        }
    }
}

/// Copy of `view` with column `col` randomly permuted. The source is untouched.
pub fn shuffle_column<T: Scalar, R: Rng + ?Sized>(
    view: &Dataset<T>,
    col: usize,
    rng: &mut R,
) -> Result<Dataset<T>, DatasetError> {
    let w = view.n_features();
    if col >= w {
        return Err(DatasetError::FeatureOutOfRange { index: col, width: w });
    }
    let mut out = view.clone();
    out.columns[col].shuffle(rng);
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TargetColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for TargetColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("last") {
            Ok(TargetColumn::Last)
        } else if let Ok(i) = s.parse::<usize>() {
            Ok(TargetColumn::Index(i))
        } else {
            Ok(TargetColumn::Name(s.to_string()))
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "?"
}

/// Loads a CSV whose last column is the target.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, task: Task) -> Result<Dataset<T>, DatasetError> {
    load_csv_with(path, task, &TargetColumn::Last)
}

pub fn load_csv_with<T: Scalar>(
    path: impl AsRef<Path>,
    task: Task,
    target: &TargetColumn,
) -> Result<Dataset<T>, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, task, target)
}

/// Parses CSV text: header row, comma separator, `.` decimals.
///
/// Row numbers in errors count data rows from zero; column numbers are file
/// columns from zero. Empty cells and `?` are missing values.
pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    task: Task,
    target: &TargetColumn,
) -> Result<Dataset<T>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(DatasetError::Empty);
    }
    let width = header.len();
    let target_col = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => return Err(DatasetError::TargetColumn(i.to_string())),
        TargetColumn::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| DatasetError::TargetColumn(n.clone()))?,
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&c| c != target_col).collect();

    let mut columns: Vec<Vec<T>> = vec![Vec::new(); feature_cols.len()];
    let mut raw_target: Vec<String> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        for col in 0..width {
            let cell = record.get(col).unwrap_or("");
            if is_missing(cell) {
                return Err(DatasetError::MissingValue { row, col });
            }
        }
        if record.len() > width {
            return Err(DatasetError::Shape(format!(
                "row {row} has {} fields, header has {width}",
                record.len()
            )));
        }
        for (slot, &col) in feature_cols.iter().enumerate() {
            let cell = record[col].trim();
            let v: T = cell.parse().map_err(|_| DatasetError::NonNumeric {
                row,
                col,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite { row, col });
            }
            columns[slot].push(v);
        }
        raw_target.push(record[target_col].trim().to_string());
    }
    if raw_target.is_empty() {
        return Err(DatasetError::Empty);
    }

    let (target, class_names) = match task {
        Task::Regression => {
            let mut values = Vec::with_capacity(raw_target.len());
            for (row, cell) in raw_target.iter().enumerate() {
                let v: T = cell.parse().map_err(|_| DatasetError::NonNumeric {
                    row,
                    col: target_col,
                    value: cell.clone(),
                })?;
                if !v.is_finite() {
                    return Err(DatasetError::NonFinite { row, col: target_col });
                }
                values.push(v);
            }
            (Target::Values(values), Vec::new())
        }
        Task::Classification => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            let mut names = Vec::new();
            let labels = raw_target
                .iter()
                .map(|cell| {
                    *index.entry(cell.as_str()).or_insert_with(|| {
                        names.push(cell.clone());
                        names.len() - 1
                    })
                })
                .collect();
            if names.len() < 2 {
                return Err(DatasetError::SingleClass);
            }
            (Target::Classes(labels), names)
        }
    };
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Ok(Dataset::new(feature_names, columns, target, class_names)?.with_target_name(header[target_col].clone()))
}

/// Writes the dataset as CSV with the target last. Classification targets
/// are written as their class names.
pub fn write_csv<T: Scalar, W: Write>(data: &Dataset<T>, writer: W) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(&data.target_name);
    wtr.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for row in 0..data.n_rows() {
        record.clear();
        record.extend(data.columns.iter().map(|c| c[row].to_string()));
        record.push(match &data.target {
            Target::Classes(l) => data.class_names[l[row]].clone(),
            Target::Values(v) => v[row].to_string(),
        });
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Partitioning

/// Train / validation / test row indices. Each part is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    /// Train and validation rows together, sorted ascending.
    pub fn merged(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        q.sort_unstable();
        q
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Part sizes for `s` rows: round-half-up of 60% and 20%, remainder to test.
pub fn split_sizes(s: usize) -> (usize, usize, usize) {
    let r = (6 * s + 5) / 10;
    let v = (2 * s + 5) / 10;
    (r, v, s - r - v)
}

pub const MIN_SPLIT_ROWS: usize = 5;

/// Seeded 60/20/20 split. With `stratified`, each class is spread over the
/// parts in proportion to the part sizes, off by less than one row.
pub fn split<T: Scalar>(d: &Dataset<T>, seed: u64, stratified: bool) -> Result<Partition, DatasetError> {
    let s = d.n_rows();
    if s < MIN_SPLIT_ROWS {
        return Err(DatasetError::TooSmall { rows: s, min: MIN_SPLIT_ROWS });
    }
    if stratified && d.task() != Task::Classification {
        return Err(DatasetError::StratifiedRegression);
    }
    let sizes = split_sizes(s);
    let mut rng = rng::stream(seed, &[TAG_SPLIT]);
    let mut part = if stratified {
        let groups = d.rows_by_class();
        let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
        let alloc = apportion(&counts, [sizes.0, sizes.1, sizes.2]);
        let mut part = Partition { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
        for (mut rows, [r, v, _]) in groups.into_iter().zip(alloc) {
            rows.shuffle(&mut rng);
            part.train.extend_from_slice(&rows[..r]);
            part.validation.extend_from_slice(&rows[r..r + v]);
            part.test.extend_from_slice(&rows[r + v..]);
        }
        part
    } else {
        let mut rows: Vec<usize> = (0..s).collect();
        rows.shuffle(&mut rng);
        let (r, v, _) = sizes;
        Partition {
            train: rows[..r].to_vec(),
            validation: rows[r..r + v].to_vec(),
            test: rows[r + v..].to_vec(),
        }
    };
    part.train.sort_unstable();
    part.validation.sort_unstable();
    part.test.sort_unstable();
    Ok(part)
}

/// Integer class-by-part table with row sums `counts` and column sums
/// `parts`, each cell the floor or ceiling of its proportional share.
///
/// Starts from the floors and places the leftover units with a max-flow over
/// cells whose share is fractional; the proportional table is a fractional
/// solution of that flow, so an integral one exists.
fn apportion(counts: &[usize], parts: [usize; 3]) -> Vec<[usize; 3]> {
    let total: usize = counts.iter().sum();
    let k = counts.len();
    let mut table = vec![[0usize; 3]; k];
    let mut fractional = vec![[false; 3]; k];
    for (c, &n) in counts.iter().enumerate() {
        for p in 0..3 {
            let num = n * parts[p];
            table[c][p] = num / total;
            fractional[c][p] = !num.is_multiple_of(total);
        }
    }
    let row_left: Vec<usize> = (0..k).map(|c| counts[c] - table[c].iter().sum::<usize>()).collect();
    let col_left: Vec<usize> = (0..3)
        .map(|p| parts[p] - table.iter().map(|r| r[p]).sum::<usize>())
        .collect();

    // Nodes: source, k classes, 3 parts, sink.
    let n = k + 5;
    let (source, sink) = (0, k + 4);
    let mut cap = vec![vec![0usize; n]; n];
    for c in 0..k {
        cap[source][1 + c] = row_left[c];
        for p in 0..3 {
            if fractional[c][p] {
                cap[1 + c][1 + k + p] = 1;
            }
        }
    }
    for p in 0..3 {
        cap[1 + k + p][sink] = col_left[p];
    }
    let original = cap.clone();
    loop {
        let mut prev = vec![usize::MAX; n];
        let mut stack = vec![source];
        prev[source] = source;
        while let Some(u) = stack.pop() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if cap[u][v] > 0 && prev[v] == usize::MAX {
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut v = sink;
        while v != source {
            let u = prev[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
    }
    for c in 0..k {
        for p in 0..3 {
            let (u, v) = (1 + c, 1 + k + p);
            if original[u][v] == 1 && cap[u][v] == 0 {
                table[c][p] += 1;
            }
        }
    }
    table
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Parameters of a synthetic linear regression problem. Noise is the
/// standard deviation of the additive Gaussian term relative to the standard
/// deviation of the noiseless target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_instances == 0 || self.n_features == 0 {
            return Err(DatasetError::InvalidSpec("instances and features must be positive".into()));
        }
        if self.n_informative > self.n_features {
            return Err(DatasetError::InvalidSpec(format!(
                "{} informative features exceed {} features",
                self.n_informative, self.n_features
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(DatasetError::InvalidSpec(format!("noise {} must be finite and >= 0", self.noise)));
        }
        Ok(())
    }
}

impl FromStr for SyntheticSpec {
    type Err = DatasetError;

    /// Parses `n,w,informative,noise`; the seed defaults to zero.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || DatasetError::InvalidSpec(format!("expected n,w,informative,noise, got {s:?}"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let spec = SyntheticSpec {
            n_instances: parts[0].parse().map_err(|_| bad())?,
            n_features: parts[1].parse().map_err(|_| bad())?,
            n_informative: parts[2].parse().map_err(|_| bad())?,
            noise: parts[3].parse().map_err(|_| bad())?,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub data: Dataset<T>,
    /// Coefficients of the first `n_informative` columns.
    pub coefficients: Vec<f64>,
}

/// Standard-normal features; the target is a linear combination of the first
/// `n_informative` columns with standard-normal coefficients plus noise.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Synthetic<T>, DatasetError> {
    spec.validate()?;
    let (n, w, k) = (spec.n_instances, spec.n_features, spec.n_informative);
    let mut rng = rng::stream(spec.seed, &[TAG_SYNTH]);
    let columns: Vec<Vec<f64>> = (0..w)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let coefficients: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let signal: Vec<f64> = (0..n)
        .map(|i| coefficients.iter().zip(&columns).map(|(b, c)| b * c[i]).sum())
        .collect();
    let sigma = std_dev(&signal);
    let target: Vec<T> = signal
        .iter()
        .map(|&y| {
            let eps: f64 = rng.sample(StandardNormal);
            T::of(y + spec.noise * sigma * eps)
        })
        .collect();
    let names = (0..w).map(|i| format!("x{i}")).collect();
    let columns = columns
        .into_iter()
        .map(|c| c.into_iter().map(T::of).collect())
        .collect();
    let data = Dataset::new(names, columns, Target::Values(target), Vec::new())?.with_target_name("y");
    Ok(Synthetic { data, coefficients })
}
