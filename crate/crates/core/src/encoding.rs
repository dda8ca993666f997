//! Numeric encoding: ordinal category codes, length-of-stay bins and
//! z-score standardization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Dataset, MAX_LOS_DAYS, UNKNOWN_CATEGORY};
use crate::error::{Error, Result};

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    feature_names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, n_rows: usize, feature_names: Vec<String>) -> Result<Self> {
        let n_cols = feature_names.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::shape(
                format!("{n_rows}x{n_cols} = {} values", n_rows * n_cols),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column '{}'",
                pos / n_cols.max(1),
                feature_names[pos % n_cols.max(1)]
            )));
        }
        Ok(Self {
            n_rows,
            feature_names,
            values,
        })
    }

    /// Builds a matrix from rows, naming features `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::from_rows_named(rows, names)
    }

    pub fn from_rows_named(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::shape(
                format!("rows of width {d}"),
                format!("row of width {}", bad.len()),
            ));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(values, rows.len(), feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, col)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            n_rows: rows.len(),
            feature_names: self.feature_names.clone(),
            values,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_cols()) {
            return Err(Error::InvalidInput(format!(
                "column index {bad} out of range"
            )));
        }
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            values.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        Ok(Self {
            n_rows: self.n_rows,
            feature_names: cols
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
            values,
        })
    }
}

/// Class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        Ok(Self { labels, n_classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
        }
    }
}

// ---------------------------------------------------------------------------
// Ordinal maps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryOrder {
    Explicit(Vec<String>),
    FrequencyDescending,
}

/// Category label to code mapping. Codes run `1..=categories.len()` in
/// order; anything else maps to 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalMap {
    pub column: String,
    pub categories: Vec<String>,
}

impl OrdinalMap {
    pub const UNKNOWN_CODE: u32 = 0;

    pub fn code(&self, value: Option<&str>) -> u32 {
        value
            .and_then(|v| self.categories.iter().position(|c| c == v))
            .map_or(Self::UNKNOWN_CODE, |p| p as u32 + 1)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Fits a map from observed values. With an explicit order every observed
/// label must appear in it, except the cleaning placeholder
/// [`UNKNOWN_CATEGORY`], which keeps code 0.
pub fn fit_ordinal_map<'a, I>(column: &str, values: I, order: &CategoryOrder) -> Result<OrdinalMap>
where
    I: IntoIterator<Item = Option<&'a str>>,
{
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values.into_iter().flatten() {
        *freq.entry(v).or_default() += 1;
    }
    if freq.is_empty() {
        return Err(Error::InvalidInput(format!(
            "column '{column}' has no observed values"
        )));
    }
    let categories = match order {
        CategoryOrder::Explicit(labels) => {
            let mut seen = std::collections::BTreeSet::new();
            if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(Error::Config(format!(
                    "column '{column}': duplicate label {dup:?} in order"
                )));
            }
            if let Some(label) = freq
                .keys()
                .find(|l| **l != UNKNOWN_CATEGORY && !labels.iter().any(|x| x == *l))
            {
                return Err(Error::UnorderedLabel {
                    column: column.to_string(),
                    label: label.to_string(),
                });
            }
            labels.clone()
        }
        CategoryOrder::FrequencyDescending => {
            let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            ranked.into_iter().map(|(l, _)| l.to_string()).collect()
        }
    };
    Ok(OrdinalMap {
        column: column.to_string(),
        categories,
    })
}

pub fn apply_ordinal(map: &OrdinalMap, value: Option<&str>) -> u32 {
    map.code(value)
}

/// Explicit category orders for the ordinal SPARCS columns.
pub fn sparcs_orders() -> BTreeMap<String, Vec<String>> {
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let severity = owned(&["Minor", "Moderate", "Major", "Extreme"]);
    BTreeMap::from([
        (
            "Age Group".to_string(),
            owned(&["0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"]),
        ),
        ("APR Risk of Mortality".to_string(), severity.clone()),
        ("APR Severity of Illness Description".to_string(), severity),
    ])
}

// ---------------------------------------------------------------------------
// Length-of-stay bins
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosBin {
    pub lo: u32,
    pub hi: u32,
    pub label: String,
}

/// Contiguous inclusive day ranges jointly covering `[1, 120]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LosBin>", into = "Vec<LosBin>")]
pub struct BinSpec {
    bins: Vec<LosBin>,
}

impl TryFrom<Vec<LosBin>> for BinSpec {
    type Error = Error;
    fn try_from(bins: Vec<LosBin>) -> Result<Self> {
        Self::new(bins)
    }
}

impl From<BinSpec> for Vec<LosBin> {
    fn from(spec: BinSpec) -> Self {
        spec.bins
    }
}

impl Default for BinSpec {
    fn default() -> Self {
        Self::from_ranges(&[(1, 5), (6, 10), (11, 20), (21, 30), (31, 50), (51, 120)])
            .expect("default bins form a partition")
    }
}

impl BinSpec {
    pub fn new(bins: Vec<LosBin>) -> Result<Self> {
        let mut expected_lo = 1;
        for b in &bins {
            if b.lo != expected_lo || b.hi < b.lo {
                return Err(Error::Config(format!(
                    "bin {}..={} breaks the partition of [1, {MAX_LOS_DAYS}] (expected start {expected_lo})",
                    b.lo, b.hi
                )));
            }
            expected_lo = b.hi + 1;
        }
        if expected_lo != MAX_LOS_DAYS + 1 {
            return Err(Error::Config(format!("bins must end at {MAX_LOS_DAYS}")));
        }
        Ok(Self { bins })
    }

    pub fn from_ranges(ranges: &[(u32, u32)]) -> Result<Self> {
        Self::new(
            ranges
                .iter()
                .map(|&(lo, hi)| LosBin {
                    lo,
                    hi,
                    label: format!("{lo}-{hi}"),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[LosBin] {
        &self.bins
    }

    pub fn labels(&self) -> Vec<String> {
        self.bins.iter().map(|b| b.label.clone()).collect()
    }

    pub fn assign(&self, los_days: i64) -> Result<usize> {
        if los_days < 1 || los_days > MAX_LOS_DAYS as i64 {
            return Err(Error::LosOutOfRange(los_days));
        }
        let d = los_days as u32;
        Ok(self.bins.partition_point(|b| b.hi < d))
    }
}

pub fn assign_bin(los_days: i64, spec: &BinSpec) -> Result<usize> {
    spec.assign(los_days)
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerParams {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

pub fn fit_standardizer(x: &FeatureMatrix) -> Result<StandardizerParams> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "standardizer needs at least 2 rows, got {n}"
        )));
    }
    let d = x.n_cols();
    let mut means = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut vars = vec![0.0; d];
    for row in x.rows() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    let stds: Vec<f64> = vars.iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(StandardizerParams {
        feature_names: x.feature_names().to_vec(),
        zero_variance: stds.iter().map(|&s| s == 0.0).collect(),
        means,
        stds,
    })
}

impl StandardizerParams {
    fn check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.feature_names() != self.feature_names.as_slice() {
            return Err(Error::shape(
                format!("features {:?}", self.feature_names),
                format!("{:?}", x.feature_names()),
            ));
        }
        Ok(())
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(x)?;
        let mut values = Vec::with_capacity(x.values().len());
        for row in x.rows() {
            for (j, v) in row.iter().enumerate() {
                values.push(if self.zero_variance[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                });
            }
        }
        FeatureMatrix::new(values, x.n_rows(), self.feature_names.clone())
    }

    /// Inverse affine map; zero-variance columns come back as their mean.
    pub fn inverse(&self, z: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(z)?;
        let mut values = Vec::with_capacity(z.values().len());
        for row in z.rows() {
            for (j, v) in row.iter().enumerate() {
                values.push(v * self.stds[j] + self.means[j]);
            }
        }
        FeatureMatrix::new(values, z.n_rows(), self.feature_names.clone())
    }
}

pub fn standardize(params: &StandardizerParams, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    params.transform(x)
}

// ---------------------------------------------------------------------------
// Design matrix
// ---------------------------------------------------------------------------

/// Everything needed to turn a cleaned table into model inputs identically
/// at train and predict time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoders {
    pub maps: Vec<OrdinalMap>,
    pub bins: BinSpec,
}

impl Encoders {
    /// Fits one ordinal map per categorical column, using the explicit order
    /// where given and frequency order otherwise.
    pub fn fit(
        ds: &Dataset,
        orders: &BTreeMap<String, Vec<String>>,
        bins: BinSpec,
    ) -> Result<Self> {
        let mut maps = Vec::new();
        for col in ds.columns() {
            if let ColumnData::Text(values) = &col.data {
                let order = match orders.get(&col.name) {
                    Some(labels) => CategoryOrder::Explicit(labels.clone()),
                    None => CategoryOrder::FrequencyDescending,
                };
                maps.push(fit_ordinal_map(
                    &col.name,
                    values.iter().map(Option::as_deref),
                    &order,
                )?);
            }
        }
        Ok(Self { maps, bins })
    }

    pub fn map_for(&self, column: &str) -> Option<&OrdinalMap> {
        self.maps.iter().find(|m| m.column == column)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn design_matrix(&self, ds: &Dataset) -> Result<(FeatureMatrix, LabelVector)> {
        build_design_matrix(ds, &self.maps, &self.bins)
    }
}

/// Encodes every non-LoS column in table order and bins the LoS column into
/// labels. Numeric cells must be present (run cleaning first).
pub fn build_design_matrix(
    ds: &Dataset,
    maps: &[OrdinalMap],
    spec: &BinSpec,
) -> Result<(FeatureMatrix, LabelVector)> {
    let los = ds.los_values()?;
    let n = ds.n_rows();
    let features: Vec<_> = ds
        .columns()
        .iter()
        .filter(|c| !matches!(c.data, ColumnData::Days(_)))
        .collect();
    if features.is_empty() {
        return Err(Error::InvalidInput(
            "no feature columns left to encode".into(),
        ));
    }

    let mut encoded: Vec<Vec<f64>> = Vec::with_capacity(features.len());
    for col in &features {
        let column = match &col.data {
            ColumnData::Text(values) => {
                let map = maps
                    .iter()
                    .find(|m| m.column == col.name)
                    .ok_or_else(|| Error::UnfittedColumn(col.name.clone()))?;
                values
                    .iter()
                    .map(|v| f64::from(map.code(v.as_deref())))
                    .collect()
            }
            ColumnData::Number(values) => values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "missing value in column '{}' row {}; clean first",
                            col.name,
                            i + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?,
            ColumnData::Days(_) => unreachable!("filtered above"),
        };
        encoded.push(column);
    }

    let d = encoded.len();
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        values.extend(encoded.iter().map(|c| c[i]));
    }
    let names = features.iter().map(|c| c.name.clone()).collect();
    let x = FeatureMatrix::new(values, n, names)?;

    let labels = los
        .iter()
        .enumerate()
        .map(|(i, d)| match d {
            Some(d) => spec.assign(i64::from(*d)),
            None => Err(Error::InvalidInput(format!(
                "missing length of stay at row {}; clean first",
                i + 1
            ))),
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok((x, LabelVector::new(labels, spec.len())?))
}
