//! Loading, cleaning and profiling of inpatient discharge tables.
//!
//! A [`Dataset`] is a small columnar table whose columns are typed by a
//! [`ColumnSchema`]. Empty cells are kept as missing values until
//! [`Dataset::clean`] resolves them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest recorded length of stay; the source aggregates longer stays here.
pub const MAX_LOS_DAYS: u32 = 120;

/// Label written into categorical cells that were missing before cleaning.
pub const UNKNOWN_CATEGORY: &str = "Unknown";

/// Columns removed by default before modelling.
pub const SPARCS_DROP_LIST: [&str; 6] = [
    "License Number",
    "Payment Typology 2",
    "Payment Typology 3",
    "Zip Code - 3 digits",
    "Facility Id",
    "Attending Provider License Number",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    /// Numeric value published as `$1,234.50`.
    Currency,
    /// Length of stay in days; exactly one per schema.
    Los,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub required: bool,
    /// Header in the source file when it differs from `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<String>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            required: false,
            header: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric)
    }

    pub fn currency(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Currency)
    }

    pub fn los(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Los).required()
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn with_header(mut self, header: impl Into<String>) -> Self {
        self.header = Some(header.into());
        self
    }

    pub fn source_header(&self) -> &str {
        self.header.as_deref().unwrap_or(&self.name)
    }
}

pub fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for col in schema {
        if !seen.insert(col.name.as_str()) {
            return Err(Error::Config(format!(
                "duplicate schema column '{}'",
                col.name
            )));
        }
    }
    let los = schema.iter().filter(|c| c.kind == ColumnKind::Los).count();
    if los != 1 {
        return Err(Error::Config(format!(
            "schema must contain exactly one length-of-stay column, found {los}"
        )));
    }
    Ok(())
}

/// Default mapping for the New York SPARCS inpatient discharge export.
pub fn sparcs_schema() -> Vec<ColumnSchema> {
    use ColumnSchema as C;
    vec![
        C::categorical("Health Service Area"),
        C::numeric("Facility Id"),
        C::categorical("Zip Code - 3 digits"),
        C::categorical("Age Group").required(),
        C::categorical("Gender"),
        C::categorical("Race"),
        C::categorical("Type of Admission"),
        C::categorical("Patient Disposition"),
        C::numeric("CCS Diagnosis Code"),
        C::numeric("CCS Procedure Code"),
        C::numeric("APR DRG Code"),
        C::numeric("APR MDC Code"),
        C::numeric("APR Severity of Illness Code"),
        C::categorical("APR Severity of Illness Description"),
        C::categorical("APR Risk of Mortality"),
        C::categorical("APR Medical Surgical Description"),
        C::categorical("Payment Typology 1"),
        C::categorical("Payment Typology 2"),
        C::categorical("Payment Typology 3"),
        C::categorical("Emergency Department Indicator"),
        C::currency("Total Charges"),
        C::currency("Total Costs"),
        C::los("Length of Stay"),
    ]
}

/// Parses a length-of-stay cell. `"120 +"` and anything above 120 collapse
/// to 120.
pub fn parse_los(raw: &str) -> Result<u32> {
    let trimmed = raw.trim();
    let digits = trimmed
        .strip_suffix('+')
        .map(str::trim_end)
        .unwrap_or(trimmed);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::ParseLos(raw.to_string()));
    }
    // Digit strings too long for u64 are still "120 or more".
    let days = digits.parse::<u64>().unwrap_or(u64::MAX);
    if days == 0 {
        return Err(Error::ParseLos(raw.to_string()));
    }
    Ok(days.min(MAX_LOS_DAYS as u64) as u32)
}

fn parse_number(raw: &str, kind: ColumnKind) -> Option<f64> {
    let value = match kind {
        ColumnKind::Currency => {
            let cleaned: String = raw.chars().filter(|c| *c != '$' && *c != ',').collect();
            cleaned.trim().parse::<f64>().ok()?
        }
        _ => raw.parse::<f64>().ok()?,
    };
    value.is_finite().then_some(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum ColumnData {
    Text(Vec<Option<String>>),
    Number(Vec<Option<f64>>),
    Days(Vec<Option<u32>>),
}

impl ColumnData {
    fn empty_for(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Categorical => ColumnData::Text(Vec::new()),
            ColumnKind::Numeric | ColumnKind::Currency => ColumnData::Number(Vec::new()),
            ColumnKind::Los => ColumnData::Days(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Text(v) => v.len(),
            ColumnData::Number(v) => v.len(),
            ColumnData::Days(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Text(v) => v[row].is_none(),
            ColumnData::Number(v) => v[row].is_none(),
            ColumnData::Days(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            ColumnData::Text(v) => ColumnData::Text(rows.iter().map(|&i| v[i].clone()).collect()),
            ColumnData::Number(v) => ColumnData::Number(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Days(v) => ColumnData::Days(rows.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Numeric view: numbers as-is, days as floats, text is `None`.
    pub fn as_f64(&self, row: usize) -> Option<f64> {
        match self {
            ColumnData::Number(v) => v[row],
            ColumnData::Days(v) => v[row].map(f64::from),
            ColumnData::Text(_) => None,
        }
    }

    fn cell_string(&self, row: usize) -> String {
        match self {
            ColumnData::Text(v) => v[row].clone().unwrap_or_default(),
            ColumnData::Number(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            ColumnData::Days(v) => match v[row] {
                Some(MAX_LOS_DAYS) => format!("{MAX_LOS_DAYS} +"),
                Some(d) => d.to_string(),
                None => String::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub data: ColumnData,
}

/// Immutable columnar table of discharge records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericFill {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingPolicy {
    pub categorical_fill: String,
    pub numeric_fill: NumericFill,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        Self {
            categorical_fill: UNKNOWN_CATEGORY.to_string(),
            numeric_fill: NumericFill::Median,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_dropped: usize,
    /// Missing cells per column in the input, before any row was dropped.
    pub missing_per_column: BTreeMap<String, usize>,
    /// Fill value used for each column that needed imputation.
    pub imputed: BTreeMap<String, String>,
    pub columns_dropped: Vec<String>,
    /// Names passed to [`Dataset::drop_columns`] that were not present.
    pub columns_absent: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDrop {
    pub dropped: Vec<String>,
    pub absent: Vec<String>,
}

impl CleanReport {
    pub fn record_drop(&mut self, drop: &ColumnDrop) {
        self.columns_dropped.extend(drop.dropped.iter().cloned());
        self.columns_absent.extend(drop.absent.iter().cloned());
    }
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        let mut names = BTreeSet::new();
        for col in &columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate column '{}'",
                    col.name
                )));
            }
            if col.data.len() != n_rows {
                return Err(Error::shape(
                    format!("{n_rows} rows"),
                    format!("{} rows in column '{}'", col.data.len(), col.name),
                ));
            }
            let compatible = matches!(
                (col.kind, &col.data),
                (ColumnKind::Categorical, ColumnData::Text(_))
                    | (
                        ColumnKind::Numeric | ColumnKind::Currency,
                        ColumnData::Number(_)
                    )
                    | (ColumnKind::Los, ColumnData::Days(_))
            );
            if !compatible {
                return Err(Error::InvalidInput(format!(
                    "column '{}' data does not match kind {:?}",
                    col.name, col.kind
                )));
            }
            if let ColumnData::Days(days) = &col.data {
                if let Some(bad) = days.iter().flatten().find(|&&d| d == 0 || d > MAX_LOS_DAYS) {
                    return Err(Error::LosOutOfRange(*bad as i64));
                }
            }
        }
        Ok(Self { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn los_column(&self) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Los)
    }

    pub fn los_values(&self) -> Result<&[Option<u32>]> {
        match self.los_column().map(|c| &c.data) {
            Some(ColumnData::Days(v)) => Ok(v),
            _ => Err(Error::MissingColumn("length of stay".into())),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                data: c.data.select(rows),
            })
            .collect();
        Self {
            columns,
            n_rows: rows.len(),
        }
    }

    /// Removes the named columns. Names that are not present are reported,
    /// not treated as errors.
    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> (Dataset, ColumnDrop) {
        let mut outcome = ColumnDrop::default();
        for name in names {
            let name = name.as_ref();
            if self.column(name).is_some() {
                outcome.dropped.push(name.to_string());
            } else {
                log::info!("drop list entry '{name}' not present; ignored");
                outcome.absent.push(name.to_string());
            }
        }
        let columns = self
            .columns
            .iter()
            .filter(|c| !outcome.dropped.contains(&c.name))
            .cloned()
            .collect();
        let ds = Dataset {
            columns,
            n_rows: self.n_rows,
        };
        (ds, outcome)
    }

    /// Drops rows without a length of stay, then fills remaining gaps:
    /// categoricals get the policy's label, numerics the column median (or
    /// mean). A numeric column with no observed value at all is dropped.
    pub fn clean(&self, policy: &MissingPolicy) -> Result<(Dataset, CleanReport)> {
        let los = self.los_values()?;
        let keep: Vec<usize> = (0..self.n_rows).filter(|&i| los[i].is_some()).collect();
        let mut report = CleanReport {
            rows_dropped: self.n_rows - keep.len(),
            ..CleanReport::default()
        };
        for col in &self.columns {
            report
                .missing_per_column
                .insert(col.name.clone(), col.data.missing_count());
        }
        if keep.is_empty() {
            return Err(Error::EmptyAfterCleaning);
        }

        let kept = self.select_rows(&keep);
        let mut columns = Vec::with_capacity(kept.columns.len());
        for col in kept.columns {
            let data = match col.data {
                ColumnData::Text(values) => {
                    if values.iter().any(Option::is_none) {
                        report
                            .imputed
                            .insert(col.name.clone(), policy.categorical_fill.clone());
                    }
                    ColumnData::Text(
                        values
                            .into_iter()
                            .map(|v| Some(v.unwrap_or_else(|| policy.categorical_fill.clone())))
                            .collect(),
                    )
                }
                ColumnData::Number(values) => {
                    if values.iter().any(Option::is_none) {
                        let observed: Vec<f64> = values.iter().flatten().copied().collect();
                        let fill = match policy.numeric_fill {
                            NumericFill::Median => median(&observed),
                            NumericFill::Mean => mean(&observed),
                        };
                        let Some(fill) = fill else {
                            log::warn!("column '{}' has no observed values; dropped", col.name);
                            report.columns_dropped.push(col.name.clone());
                            continue;
                        };
                        report.imputed.insert(col.name.clone(), fill.to_string());
                        ColumnData::Number(
                            values
                                .into_iter()
                                .map(|v| Some(v.unwrap_or(fill)))
                                .collect(),
                        )
                    } else {
                        ColumnData::Number(values)
                    }
                }
                days @ ColumnData::Days(_) => days,
            };
            columns.push(Column {
                name: col.name,
                kind: col.kind,
                data,
            });
        }
        let cleaned = Dataset {
            columns,
            n_rows: keep.len(),
        };
        Ok((cleaned, report))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.data.cell_string(row)))?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Reads a CSV file, keeping only the schema's columns in schema order.
///
/// Optional schema columns missing from the header are skipped. Empty cells
/// become missing values; a non-empty cell that does not parse is an error
/// in a required column and a missing value otherwise.
pub fn load_csv(path: &Path, schema: &[ColumnSchema]) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &[ColumnSchema]) -> Result<Dataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidInput("CSV header row is empty".into()));
    }

    let mut layout: Vec<(usize, &ColumnSchema)> = Vec::new();
    for col in schema {
        match headers.iter().position(|h| h == col.source_header()) {
            Some(idx) => layout.push((idx, col)),
            None if col.required || col.kind == ColumnKind::Los => {
                return Err(Error::MissingColumn(col.source_header().to_string()))
            }
            None => log::info!("optional column '{}' not in header; skipped", col.name),
        }
    }

    let mut data: Vec<ColumnData> = layout
        .iter()
        .map(|(_, c)| ColumnData::empty_for(c.kind))
        .collect();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((idx, col), out) in layout.iter().zip(data.iter_mut()) {
            let cell = record.get(*idx).unwrap_or("");
            let bad_cell = || Error::ParseCell {
                row: row + 1,
                column: col.name.clone(),
                value: cell.to_string(),
            };
            match out {
                ColumnData::Text(v) => v.push((!cell.is_empty()).then(|| cell.to_string())),
                ColumnData::Number(v) => {
                    let parsed = if cell.is_empty() {
                        None
                    } else {
                        match parse_number(cell, col.kind) {
                            Some(x) => Some(x),
                            None if col.required => return Err(bad_cell()),
                            None => None,
                        }
                    };
                    v.push(parsed);
                }
                ColumnData::Days(v) => {
                    let parsed = if cell.is_empty() {
                        None
                    } else {
                        match parse_los(cell) {
                            Ok(d) => Some(d),
                            Err(_) if col.required || col.kind == ColumnKind::Los => {
                                return Err(bad_cell())
                            }
                            Err(_) => None,
                        }
                    };
                    v.push(parsed);
                }
            }
        }
    }

    let columns = layout
        .into_iter()
        .zip(data)
        .map(|((_, col), data)| Column {
            name: col.name.clone(),
            kind: col.kind,
            data,
        })
        .collect();
    Dataset::new(columns)
}

// ---------------------------------------------------------------------------
// Profiling
// ---------------------------------------------------------------------------

/// Numeric columns with at most this many distinct values also get a
/// group-by table (severity codes, diagnosis groups).
const GROUPBY_MAX_DISTINCT: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnSummary {
    Numeric {
        name: String,
        count: usize,
        missing: usize,
        min: f64,
        max: f64,
        mean: f64,
        std: f64,
    },
    Categorical {
        name: String,
        missing: usize,
        /// Category frequencies, most frequent first.
        frequencies: Vec<(String, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major, `names.len()` squared.
    pub values: Vec<Vec<f64>>,
    /// Columns with zero variance; their correlations are reported as 0.
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub degenerate: bool,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    pub fn entries(&self) -> Vec<CorrelationEntry> {
        let mut out = Vec::new();
        for (i, a) in self.names.iter().enumerate() {
            for (j, b) in self.names.iter().enumerate() {
                out.push(CorrelationEntry {
                    a: a.clone(),
                    b: b.clone(),
                    r: self.values[i][j],
                    degenerate: self.degenerate[i] || self.degenerate[j],
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub category: String,
    /// Mean length of stay over rows of the group with a recorded stay.
    pub mean_los: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTable {
    pub column: String,
    pub rows: Vec<GroupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosAverage {
    pub los: u32,
    pub count: usize,
    pub mean: f64,
}

/// Mean of a currency column for each length-of-stay value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrencyByLos {
    pub column: String,
    pub rows: Vec<LosAverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub n_rows: usize,
    pub columns: Vec<ColumnSummary>,
    pub correlations: CorrelationMatrix,
    pub groupby: Vec<GroupTable>,
    /// `(days, count)` over rows with a recorded stay.
    pub los_histogram: Vec<(u32, usize)>,
    pub currency_by_los: Vec<CurrencyByLos>,
}

/// Pearson correlation over pairs where both values are present.
/// Returns `(r, degenerate)`; a zero-variance side gives `(0.0, true)`.
pub fn pearson(x: &[f64], y: &[f64]) -> (f64, bool) {
    let n = x.len().min(y.len());
    if n == 0 {
        return (0.0, true);
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, true);
    }
    ((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), false)
}

fn group_label(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        x.to_string()
    }
}

pub fn profile(ds: &Dataset) -> Result<ProfileReport> {
    if ds.n_rows() == 0 {
        return Err(Error::InvalidInput(
            "cannot profile an empty dataset".into(),
        ));
    }
    let los = ds.los_values()?;
    let n = ds.n_rows();

    let mut summaries = Vec::new();
    let mut numeric: Vec<(&str, Vec<Option<f64>>)> = Vec::new();
    let mut groupby = Vec::new();
    let mut currency_by_los = Vec::new();

    for col in ds.columns() {
        match &col.data {
            ColumnData::Text(values) => {
                let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
                let mut groups: BTreeMap<String, (f64, usize, usize)> = BTreeMap::new();
                for (i, v) in values.iter().enumerate() {
                    if let Some(v) = v {
                        *freq.entry(v).or_default() += 1;
                    }
                    let key = v.clone().unwrap_or_else(|| "<missing>".to_string());
                    let g = groups.entry(key).or_default();
                    g.2 += 1;
                    if let Some(d) = los[i] {
                        g.0 += f64::from(d);
                        g.1 += 1;
                    }
                }
                let mut frequencies: Vec<(String, usize)> =
                    freq.into_iter().map(|(k, c)| (k.to_string(), c)).collect();
                frequencies.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                summaries.push(ColumnSummary::Categorical {
                    name: col.name.clone(),
                    missing: col.data.missing_count(),
                    frequencies,
                });
                groupby.push(group_table(&col.name, groups));
            }
            ColumnData::Number(_) | ColumnData::Days(_) => {
                let values: Vec<Option<f64>> = (0..n).map(|i| col.data.as_f64(i)).collect();
                let observed: Vec<f64> = values.iter().flatten().copied().collect();
                let count = observed.len();
                let (min, max, mean, std) = if count == 0 {
                    (0.0, 0.0, 0.0, 0.0)
                } else {
                    let mean = observed.iter().sum::<f64>() / count as f64;
                    let var =
                        observed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
                    let min = observed.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (min, max, mean, var.sqrt())
                };
                summaries.push(ColumnSummary::Numeric {
                    name: col.name.clone(),
                    count,
                    missing: n - count,
                    min,
                    max,
                    mean,
                    std,
                });

                if col.kind != ColumnKind::Los {
                    let distinct: BTreeSet<u64> = observed.iter().map(|x| x.to_bits()).collect();
                    if distinct.len() <= GROUPBY_MAX_DISTINCT {
                        let mut groups: BTreeMap<(u8, i64, String), (f64, usize, usize)> =
                            BTreeMap::new();
                        for (i, v) in values.iter().enumerate() {
                            // Sort numerically; missing values last.
                            let key = match v {
                                Some(x) => (0, (*x * 1e6).round() as i64, group_label(*x)),
                                None => (1, 0, "<missing>".to_string()),
                            };
                            let g = groups.entry(key).or_default();
                            g.2 += 1;
                            if let Some(d) = los[i] {
                                g.0 += f64::from(d);
                                g.1 += 1;
                            }
                        }
                        groupby.push(group_table(
                            &col.name,
                            groups.into_iter().map(|((_, _, label), g)| (label, g)),
                        ));
                    }
                }
                if col.kind == ColumnKind::Currency {
                    let mut by_los: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
                    for (i, v) in values.iter().enumerate() {
                        if let (Some(x), Some(d)) = (v, los[i]) {
                            let e = by_los.entry(d).or_default();
                            e.0 += x;
                            e.1 += 1;
                        }
                    }
                    currency_by_los.push(CurrencyByLos {
                        column: col.name.clone(),
                        rows: by_los
                            .into_iter()
                            .map(|(los, (sum, count))| LosAverage {
                                los,
                                count,
                                mean: sum / count as f64,
                            })
                            .collect(),
                    });
                }
                numeric.push((col.name.as_str(), values));
            }
        }
    }

    let correlations = correlation_matrix(&numeric);

    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for d in los.iter().flatten() {
        *hist.entry(*d).or_default() += 1;
    }

    Ok(ProfileReport {
        n_rows: n,
        columns: summaries,
        correlations,
        groupby,
        los_histogram: hist.into_iter().collect(),
        currency_by_los,
    })
}

fn group_table(
    column: &str,
    groups: impl IntoIterator<Item = (String, (f64, usize, usize))>,
) -> GroupTable {
    GroupTable {
        column: column.to_string(),
        rows: groups
            .into_iter()
            .map(|(category, (sum, with_los, count))| GroupRow {
                category,
                mean_los: if with_los > 0 {
                    sum / with_los as f64
                } else {
                    0.0
                },
                count,
            })
            .collect(),
    }
}

fn correlation_matrix(numeric: &[(&str, Vec<Option<f64>>)]) -> CorrelationMatrix {
    let d = numeric.len();
    let mut values = vec![vec![0.0; d]; d];
    let mut degenerate = vec![false; d];
    for i in 0..d {
        let own: Vec<f64> = numeric[i].1.iter().flatten().copied().collect();
        let (r, flag) = pearson(&own, &own);
        values[i][i] = r;
        degenerate[i] = flag;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let (xs, ys): (Vec<f64>, Vec<f64>) = numeric[i]
                .1
                .iter()
                .zip(&numeric[j].1)
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            let (r, _) = pearson(&xs, &ys);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix {
        names: numeric.iter().map(|(n, _)| n.to_string()).collect(),
        values,
        degenerate,
    }
}
