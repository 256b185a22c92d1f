//! Column-typed observations, CSV ingestion and per-column scaling statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{ConditioningSpace, EncodedRows};

/// Cell tokens treated as missing at ingestion.
const MISSING: [&str; 3] = ["", "NA", "NaN"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Numeric => f.write_str("numeric"),
            ColumnKind::Categorical => f.write_str("categorical"),
        }
    }
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" | "num" | "n" => Ok(ColumnKind::Numeric),
            "categorical" | "cat" | "factor" | "f" => Ok(ColumnKind::Categorical),
            other => Err(Error::SchemaOverride(format!("unknown kind `{other}`"))),
        }
    }
}

/// A single cell value as it appears in section points and payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Level(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Level(_) => None,
        }
    }

    pub fn as_level(&self) -> Option<&str> {
        match self {
            Value::Level(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Level(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Level(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Codes index into `levels`.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column { name: name.into(), data: ColumnData::Numeric(values) }
    }

    pub fn categorical(name: impl Into<String>, codes: Vec<u32>, levels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= levels.len()) {
            return Err(Error::InvalidValue {
                var: name,
                reason: format!("code {bad} has no level"),
            });
        }
        Ok(Column { name, data: ColumnData::Categorical { codes, levels } })
    }

    /// Builds a categorical column from labels; levels are the sorted distinct labels.
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Self {
        let levels: Vec<String> = labels
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let lookup: HashMap<&str, u32> =
            levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let codes = labels.iter().map(|s| lookup[s.as_ref()]).collect();
        Column { name: name.into(), data: ColumnData::Categorical { codes, levels } }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.data {
            ColumnData::Categorical { codes, .. } => Some(codes),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { levels, .. } => Some(levels),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn level_code(&self, level: &str) -> Option<u32> {
        self.levels()?.iter().position(|l| l == level).map(|i| i as u32)
    }

    pub fn value(&self, row: usize) -> Value {
        match &self.data {
            ColumnData::Numeric(v) => Value::Num(v[row]),
            ColumnData::Categorical { codes, levels } => Value::Level(levels[codes[row] as usize].clone()),
        }
    }

    /// Numeric view of a cell; categorical cells map to their level index.
    pub fn position(&self, row: usize) -> f64 {
        match &self.data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row] as f64,
        }
    }

    /// Checks that `value` is admissible for this column.
    pub fn check_value(&self, value: &Value) -> Result<()> {
        match (&self.data, value) {
            (ColumnData::Numeric(_), Value::Num(x)) if x.is_finite() => Ok(()),
            (ColumnData::Categorical { levels, .. }, Value::Level(l)) if levels.contains(l) => Ok(()),
            _ => Err(Error::InvalidValue {
                var: self.name.clone(),
                reason: format!("`{value}` is not a valid {} value", self.kind()),
            }),
        }
    }

    /// A column of `len` copies of `value`, sharing this column's levels.
    pub fn constant(&self, value: &Value, len: usize) -> Result<Column> {
        self.check_value(value)?;
        let data = match (&self.data, value) {
            (ColumnData::Numeric(_), Value::Num(x)) => ColumnData::Numeric(vec![*x; len]),
            (ColumnData::Categorical { levels, .. }, Value::Level(l)) => {
                let code = self.level_code(l).expect("checked");
                ColumnData::Categorical { codes: vec![code; len], levels: levels.clone() }
            }
            _ => unreachable!("checked"),
        };
        Ok(Column { name: self.name.clone(), data })
    }

    /// Column of the given values, sharing this column's levels.
    pub fn with_values(&self, values: &[Value]) -> Result<Column> {
        let data = match &self.data {
            ColumnData::Numeric(_) => {
                let mut out = Vec::with_capacity(values.len());
                for v in values {
                    self.check_value(v)?;
                    out.push(v.as_num().expect("checked"));
                }
                ColumnData::Numeric(out)
            }
            ColumnData::Categorical { levels, .. } => {
                let mut codes = Vec::with_capacity(values.len());
                for v in values {
                    self.check_value(v)?;
                    codes.push(self.level_code(v.as_level().expect("checked")).expect("checked"));
                }
                ColumnData::Categorical { codes, levels: levels.clone() }
            }
        };
        Ok(Column { name: self.name.clone(), data })
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
        };
        Column { name: self.name.clone(), data }
    }

    fn cell_text(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
        }
    }
}

/// Immutable, column-major table of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFrame {
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    nrows: usize,
}

impl DataFrame {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::EmptyInput);
        };
        let nrows = first.len();
        if nrows == 0 {
            return Err(Error::NoUsableRows { dropped: 0 });
        }
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != nrows {
                return Err(Error::RaggedColumn(c.name.clone()));
            }
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(DataFrame { columns, index, nrows })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.index
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn row_values(&self, row: usize, vars: &[String]) -> Result<BTreeMap<String, Value>> {
        vars.iter().map(|v| Ok((v.clone(), self.column(v)?.value(row)))).collect()
    }

    pub fn take(&self, rows: &[usize]) -> Result<DataFrame> {
        DataFrame::new(self.columns.iter().map(|c| c.take(rows)).collect())
    }

    /// Writes the frame as RFC-4180 CSV with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.names())?;
        for r in 0..self.nrows {
            w.write_record(self.columns.iter().map(|c| c.cell_text(r)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Column role assignment: section (S), conditioning (C), hidden (F) and response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct Roles {
    pub section: Vec<String>,
    pub conditioning: Vec<String>,
    #[serde(default)]
    pub hidden: Vec<String>,
    #[serde(default)]
    pub response: Option<String>,
}

impl Roles {
    /// Every column not named as section, hidden or response becomes conditioning.
    pub fn infer(df: &DataFrame, response: Option<&str>, section: &[String], hidden: &[String]) -> Roles {
        let taken: BTreeSet<&str> = section
            .iter()
            .chain(hidden)
            .map(String::as_str)
            .chain(response)
            .collect();
        Roles {
            section: section.to_vec(),
            conditioning: df.names().filter(|n| !taken.contains(n)).map(str::to_string).collect(),
            hidden: hidden.to_vec(),
            response: response.map(str::to_string),
        }
    }

    pub fn validate(&self, df: &DataFrame) -> Result<()> {
        if self.section.is_empty() || self.section.len() > 2 {
            return Err(Error::InvalidRoles(format!(
                "need 1 or 2 section variables, got {}",
                self.section.len()
            )));
        }
        let mut seen = BTreeSet::new();
        let all = self
            .section
            .iter()
            .chain(&self.conditioning)
            .chain(&self.hidden)
            .chain(self.response.iter());
        for name in all {
            df.column(name)?;
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidRoles(format!("`{name}` is assigned more than one role")));
            }
        }
        if let Some(missing) = df.names().find(|n| !seen.contains(n)) {
            return Err(Error::InvalidRoles(format!("column `{missing}` has no role")));
        }
        Ok(())
    }

    /// Section and conditioning and hidden variables, i.e. everything a model may read.
    pub fn predictors(&self) -> Vec<String> {
        self.section.iter().chain(&self.conditioning).chain(&self.hidden).cloned().collect()
    }
}

pub type SchemaOverride = BTreeMap<String, ColumnKind>;

/// Parses `column=kind` lines. If the text has `[section]` headers only the
/// `[schema]` section is read; `#` starts a comment.
pub fn parse_schema_override(text: &str) -> Result<SchemaOverride> {
    let has_sections = text.lines().any(|l| l.trim_start().starts_with('['));
    let mut in_schema = !has_sections;
    let mut out = SchemaOverride::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            in_schema = header.trim() == "schema";
            continue;
        }
        if !in_schema {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::SchemaOverride(format!("expected key=value, got `{line}`")))?;
        out.insert(k.trim().to_string(), v.parse()?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub columns: Vec<(String, ColumnKind)>,
}

/// Parses CSV bytes into a typed frame. A column is numeric iff every
/// non-missing cell parses as a finite number, unless overridden.
pub fn ingest_csv(bytes: &[u8], schema: &SchemaOverride) -> Result<(DataFrame, IngestReport)> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput);
    }
    let mut seen = BTreeSet::new();
    for h in &header {
        if !seen.insert(h) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    for name in schema.keys() {
        if !seen.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut read = 0;
    for record in reader.records() {
        let record = record?;
        read += 1;
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if cells.len() == header.len() && cells.iter().all(|c| !MISSING.contains(&c.as_str())) {
            rows.push(cells);
        }
    }
    let dropped = read - rows.len();
    if rows.is_empty() {
        return Err(Error::NoUsableRows { dropped });
    }

    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let parsed: Option<Vec<f64>> = rows
            .iter()
            .map(|r| r[j].parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        let kind = schema.get(name).copied().unwrap_or(match parsed {
            Some(_) => ColumnKind::Numeric,
            None => ColumnKind::Categorical,
        });
        let column = match (kind, parsed) {
            (ColumnKind::Numeric, Some(values)) => Column::numeric(name.clone(), values),
            (ColumnKind::Numeric, None) => {
                return Err(Error::InvalidValue {
                    var: name.clone(),
                    reason: "declared numeric but holds non-numeric cells".into(),
                })
            }
            (ColumnKind::Categorical, _) => {
                let labels: Vec<&str> = rows.iter().map(|r| r[j].as_str()).collect();
                Column::from_labels(name.clone(), &labels)
            }
        };
        columns.push(column);
    }
    let df = DataFrame::new(columns)?;
    let report = IngestReport {
        rows_read: read,
        rows_dropped: dropped,
        columns: df.columns().iter().map(|c| (c.name().to_string(), c.kind())).collect(),
    };
    Ok((df, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single row).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
}

impl NumericStats {
    pub fn of(values: &[f64]) -> NumericStats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
        let sd = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        NumericStats { mean, sd, min, max, range: max - min }
    }

    pub fn is_constant(&self) -> bool {
        !(self.sd > 0.0 && self.range > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ColumnSummary {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<NumericStats>,
    pub constant: bool,
}

/// What a validated dataset looks like; the CLI `ingest` output and the
/// server's dataset resource share this shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub nrows: usize,
    pub rows_dropped: usize,
    pub columns: Vec<ColumnSummary>,
}

impl DatasetSummary {
    pub fn of(df: &DataFrame, rows_dropped: usize) -> DatasetSummary {
        let columns = df
            .columns()
            .iter()
            .map(|c| {
                let stats = c.as_numeric().map(NumericStats::of);
                let constant = match (&stats, c.levels()) {
                    (Some(s), _) => s.is_constant(),
                    (None, _) => c.codes().is_some_and(|codes| codes.iter().all(|&x| x == codes[0])),
                };
                ColumnSummary {
                    name: c.name().to_string(),
                    kind: c.kind(),
                    levels: c.levels().map(<[String]>::to_vec),
                    stats,
                    constant,
                }
            })
            .collect();
        DatasetSummary { id: None, nrows: df.nrows(), rows_dropped, columns }
    }
}

/// Per numeric column statistics; constant columns are flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStats {
    pub columns: BTreeMap<String, NumericStats>,
}

impl ScalingStats {
    pub fn compute(df: &DataFrame) -> ScalingStats {
        let columns = df
            .columns()
            .iter()
            .filter_map(|c| c.as_numeric().map(|v| (c.name().to_string(), NumericStats::of(v))))
            .collect();
        ScalingStats { columns }
    }

    pub fn constant_columns(&self) -> Vec<&str> {
        self.columns.iter().filter(|(_, s)| s.is_constant()).map(|(n, _)| n.as_str()).collect()
    }
}

/// Seeded subsample of at most `cap` rows, returned in ascending row order.
pub fn subsample_rows(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n, cap).into_vec();
    rows.sort_unstable();
    rows
}

/// Row minimising total dissimilarity to all (subsampled) rows over `vars`.
///
/// Standardized Euclidean when every var is numeric, range-normalized Gower
/// otherwise. Ties go to the lowest row index.
pub fn medoid(df: &DataFrame, vars: &[String], cap: usize, seed: u64) -> Result<usize> {
    if vars.is_empty() {
        return Err(Error::InvalidArgument("medoid needs at least one variable".into()));
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("medoid cap must be at least 1".into()));
    }
    let space = ConditioningSpace::new(df, vars)?;
    if df.nrows() == 1 {
        return Ok(0);
    }
    if space.is_empty() {
        return Err(Error::AllConstant);
    }
    let rows = subsample_rows(df.nrows(), cap, seed);
    let encoded = EncodedRows::from_frame(df, &space, &rows);
    Ok(rows[encoded.medoid_position()])
}

impl EncodedRows {
    /// Position (within the encoded rows) minimising total dissimilarity.
    pub fn medoid_position(&self) -> usize {
        let n = self.len();
        let totals: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.dissimilarity(i, j)).sum())
            .collect();
        argmin_first(&totals)
    }
}

/// Relative gap below which two sums count as tied. Mathematically equal
/// totals (e.g. the two middle rows of an even-length 1-d sample) differ by
/// a few ulps depending on summation order.
const TIE_TOL: f64 = 1e-12;

/// Index of the smallest value; the first one wins ties, including ties up
/// to rounding.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let b = values[best];
        // an infinite incumbent has no tolerance band (inf - inf is NaN)
        let bar = if b.is_finite() { b - TIE_TOL * b.abs() } else { b };
        if v < bar {
            best = i;
        }
    }
    best
}
