//! Value types shared by the rest of the crate, with validation and the
//! on-disk formats (CSV datasets, text/JSON constraints).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Primitive;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, col {col}: {value:?} is not a number")]
    NonNumeric {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("row {row}, col {col}: value is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
}

/// Which side of the learned surface the data is kept on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `A <= f(x)`.
    #[serde(rename = "lower")]
    LowerBound,
    /// `f(x) <= A`.
    #[serde(rename = "upper")]
    UpperBound,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::LowerBound => Direction::UpperBound,
            Direction::UpperBound => Direction::LowerBound,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::LowerBound => "lower",
            Direction::UpperBound => "upper",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower" => Ok(Direction::LowerBound),
            "upper" => Ok(Direction::UpperBound),
            other => Err(DataError::InvalidConfig(format!(
                "direction must be \"lower\" or \"upper\", got {other:?}"
            ))),
        }
    }
}

/// N points with F features each, stored row-major, plus regression targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    targets: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with all-zero targets, the training protocol's
    /// default. Feature names default to `X0..X{F-1}`.
    ///
    /// A dataset with zero rows is representable (generators may be asked for
    /// zero points); loaders and training reject it.
    pub fn new(rows: Vec<Vec<f64>>, n_features: usize) -> Result<Self, DataError> {
        let n = rows.len();
        Self::with_targets(rows, vec![0.0; n], n_features)
    }

    pub fn with_targets(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        n_features: usize,
    ) -> Result<Self, DataError> {
        if n_features == 0 {
            return Err(DataError::NoFeatures);
        }
        if targets.len() != rows.len() {
            return Err(DataError::Shape(format!(
                "{} targets for {} rows",
                targets.len(),
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(DataError::Ragged {
                    row: r + 1,
                    expected: n_features,
                    found: row.len(),
                });
            }
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        row: r + 1,
                        col: c + 1,
                    });
                }
            }
            values.extend_from_slice(row);
        }
        if let Some(r) = targets.iter().position(|t| !t.is_finite()) {
            return Err(DataError::NonFinite {
                row: r + 1,
                col: n_features + 1,
            });
        }
        Ok(Dataset {
            n_features,
            values,
            targets,
            feature_names: default_names(n_features),
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.n_features {
            return Err(DataError::Shape(format!(
                "{} names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Smallest and largest feature value over the whole matrix.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Range of one feature column.
    pub fn column_range(&self, col: usize) -> Option<(f64, f64)> {
        self.rows().map(|r| r[col]).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

fn default_names(f: usize) -> Vec<String> {
    (0..f).map(|i| format!("X{i}")).collect()
}

/// Reads a CSV file whose header names the feature columns. Targets are set
/// to zero. Row and column positions in errors are 1-based and count data
/// rows only.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_dataset(file, path)
}

fn read_dataset<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset, DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(DataError::NoFeatures);
    }
    let f = names.len();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        if record.len() != f {
            return Err(DataError::Ragged {
                row,
                expected: f,
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(f);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                row,
                col: c + 1,
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { row, col: c + 1 });
            }
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Dataset::new(rows, f)?.with_feature_names(names)
}

/// Writes the feature matrix as CSV. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&data.feature_names().join(","));
    out.push('\n');
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Writes `contents`, creating missing parent directories.
pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    let io = |source| DataError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

/// Which tail of the directional error distribution the percentile term
/// looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PercentileSide {
    /// Largest errors: points closest to, or past, the sought boundary.
    #[default]
    Largest,
    /// Smallest errors. Kept for experimentation.
    Smallest,
}

/// Weights and shape parameters of the training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Percentile, in (0, 100].
    pub gamma: f64,
    pub direction: Direction,
    pub l1: f64,
    pub l2: f64,
    #[serde(default)]
    pub percentile_side: PercentileSide,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha1: 1.0,
            alpha2: 0.5,
            alpha3: 0.5,
            gamma: 5.0,
            direction: Direction::LowerBound,
            l1: 0.05,
            l2: 0.05,
            percentile_side: PercentileSide::Largest,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("l1", self.l1),
            ("l2", self.l2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.alpha1 + self.alpha2 + self.alpha3 <= 0.0 {
            return bad("alpha1 + alpha2 + alpha3 must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 100.0) {
            return bad(format!("gamma must lie in (0, 100], got {}", self.gamma));
        }
        Ok(())
    }
}

fn default_primitives() -> Vec<Primitive> {
    vec![
        Primitive::Identity,
        Primitive::Identity,
        Primitive::Constant,
        Primitive::Constant,
    ]
}

/// Optimizer budget, masking and seeding for one or more training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` disables masking.
    pub mask_threshold: Option<f64>,
    pub seed: u64,
    pub runs: usize,
    /// Symbolic layer activations, one per hidden unit.
    #[serde(default = "default_primitives")]
    pub primitives: Vec<Primitive>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            learning_rate: 1e-8,
            mask_threshold: Some(0.001),
            seed: 0,
            runs: 10,
            primitives: default_primitives(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if let Some(t) = self.mask_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("mask_threshold must be non-negative, got {t}"));
            }
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.primitives.is_empty() {
            return bad("the symbolic layer needs at least one primitive".into());
        }
        Ok(())
    }
}

/// Coefficients below this magnitude are treated as absent when choosing the
/// normalizing coefficient of a constraint.
pub const COEFF_EPS: f64 = 1e-9;

/// A linear inequality `bound <= coeffs·x` or `coeffs·x <= bound`, in
/// canonical form: the highest-indexed coefficient with magnitude at least
/// [`COEFF_EPS`] is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraint", into = "RawConstraint")]
pub struct LinearConstraint {
    coeffs: Vec<f64>,
    bound: f64,
    relation: Direction,
}

#[derive(Serialize, Deserialize)]
struct RawConstraint {
    coeffs: Vec<f64>,
    bound: f64,
    relation: Direction,
}

impl TryFrom<RawConstraint> for LinearConstraint {
    type Error = DataError;

    fn try_from(raw: RawConstraint) -> Result<Self, Self::Error> {
        LinearConstraint::new(raw.coeffs, raw.bound, raw.relation)
    }
}

impl From<LinearConstraint> for RawConstraint {
    fn from(c: LinearConstraint) -> Self {
        RawConstraint {
            coeffs: c.coeffs,
            bound: c.bound,
            relation: c.relation,
        }
    }
}

impl LinearConstraint {
    /// Validates an already-canonical constraint. Use
    /// [`crate::extract::canonicalize`] to bring arbitrary coefficients into
    /// this form.
    pub fn new(coeffs: Vec<f64>, bound: f64, relation: Direction) -> Result<Self, DataError> {
        let bad = |msg: &str| Err(DataError::InvalidConstraint(msg.to_owned()));
        if coeffs.is_empty() {
            return bad("no coefficients");
        }
        if !bound.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return bad("non-finite value");
        }
        match coeffs.iter().rposition(|c| c.abs() >= COEFF_EPS) {
            None => bad("all coefficients are zero"),
            Some(p) if coeffs[p] != 1.0 => bad("not canonical: leading coefficient is not 1"),
            Some(_) => Ok(LinearConstraint {
                coeffs,
                bound,
                relation,
            }),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn relation(&self) -> Direction {
        self.relation
    }

    pub fn n_features(&self) -> usize {
        self.coeffs.len()
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Non-strict satisfaction: points on the boundary satisfy it.
    pub fn is_satisfied(&self, x: &[f64]) -> bool {
        let v = self.lhs(x);
        match self.relation {
            Direction::LowerBound => v >= self.bound,
            Direction::UpperBound => v <= self.bound,
        }
    }

    /// Display form using the given feature names.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> ConstraintDisplay<'a> {
        ConstraintDisplay {
            constraint: self,
            names: Some(names),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ConstraintDisplay {
            constraint: self,
            names: None,
        }
        .fmt(f)
    }
}

pub struct ConstraintDisplay<'a> {
    constraint: &'a LinearConstraint,
    names: Option<&'a [String]>,
}

impl fmt::Display for ConstraintDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.constraint;
        let mut expr = String::new();
        for (i, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let name = match self.names {
                Some(names) => names[i].clone(),
                None => format!("X{i}"),
            };
            let mag = format_number(a.abs());
            let term = if mag == "1" {
                name
            } else {
                format!("{mag}*{name}")
            };
            match (expr.is_empty(), a < 0.0) {
                (true, false) => expr.push_str(&term),
                (true, true) => {
                    expr.push('-');
                    expr.push_str(&term);
                }
                (false, false) => {
                    expr.push_str(" + ");
                    expr.push_str(&term);
                }
                (false, true) => {
                    expr.push_str(" - ");
                    expr.push_str(&term);
                }
            }
        }
        let bound = format_number(c.bound);
        match c.relation {
            Direction::LowerBound => write!(f, "{bound} <= {expr}"),
            Direction::UpperBound => write!(f, "{expr} <= {bound}"),
        }
    }
}

/// Four decimals with trailing zeros trimmed; scientific notation for
/// nonzero magnitudes below 1e-3.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() < 1e-3 {
        let s = format!("{v:.3e}");
        let (mantissa, exp) = s.split_once('e').expect("scientific format");
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let s = trim_zeros(&format!("{v:.4}")).to_owned();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes the display form to `path` and a lossless JSON sidecar next to it
/// (same stem, `.json` extension). Returns the sidecar path.
pub fn save_constraint(
    c: &LinearConstraint,
    path: impl AsRef<Path>,
    names: Option<&[String]>,
) -> Result<PathBuf, DataError> {
    let path = path.as_ref();
    let text_path = if path.extension().is_some_and(|e| e == "json") {
        path.with_extension("txt")
    } else {
        path.to_owned()
    };
    let json_path = text_path.with_extension("json");
    let text = match names {
        Some(n) if n.len() == c.n_features() => c.display_with(n).to_string(),
        _ => c.to_string(),
    };
    write_file(&text_path, &format!("{text}\n"))?;
    write_file(&json_path, &format!("{}\n", c.to_json()))?;
    Ok(json_path)
}

pub fn load_constraint(path: impl AsRef<Path>) -> Result<LinearConstraint, DataError> {
    let path = path.as_ref();
    let s = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    LinearConstraint::from_json(&s).map_err(|source| DataError::Json {
        path: path.to_owned(),
        source,
    })
}

/// Loss components at the start of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub z: f64,
    pub term_e: f64,
    pub term_p: f64,
    pub term_anchor: f64,
    pub term_reg: f64,
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    /// `None` when the trained network collapsed to all-zero coefficients.
    pub constraint: Option<LinearConstraint>,
    /// Percentage of training points violating `constraint`.
    pub violation_rate: Option<f64>,
}

impl TrainReport {
    /// Loss history as CSV: `epoch,z,term_e,term_p,term_anchor,term_reg`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,z,term_e,term_p,term_anchor,term_reg\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.z, r.term_e, r.term_p, r.term_anchor, r.term_reg
            ));
        }
        out
    }
}
