//! Typed tabular data with explicit missingness.
//!
//! A [`Dataset`] is a list of rows aligned to a [`Schema`]. Categorical columns
//! hold text labels, continuous columns hold finite reals; either may hold
//! [`Value::Missing`]. Column order is the schema order and every
//! deterministic tie-break downstream (node order, topological order, move
//! ordering in structure search) derives from it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Cell markers treated as missing on ingestion. Case-sensitive.
pub const MISSING_MARKERS: [&str; 2] = ["", "NA"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Continuous => "continuous",
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSchema {
    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }
}

/// The schema document: `{"columns":[{"name":..,"kind":..},..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        Ok(Self { columns })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Schema = serde_json::from_str(text)?;
        Schema::new(raw.columns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Schema::from_json(&text)
    }
}

/// One cell. Serialized to JSON as a string, a number, or `null`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    Category(String),
    Number(f64),
    #[default]
    Missing,
}

impl Value {
    pub fn category(label: impl Into<String>) -> Self {
        Value::Category(label.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    /// Whether this value may live in a column of the given kind.
    pub fn fits(&self, kind: ColumnKind) -> bool {
        match (self, kind) {
            (Value::Missing, _) => true,
            (Value::Category(_), ColumnKind::Categorical) => true,
            (Value::Number(x), ColumnKind::Continuous) => x.is_finite(),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Category(s) => f.write_str(s),
            Value::Number(x) => write!(f, "{x}"),
            Value::Missing => f.write_str("NA"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Category(label) => s.serialize_str(label),
            Value::Number(x) => s.serialize_f64(*x),
            Value::Missing => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ValueVisitor;

        impl<'de> Visitor<'de> for ValueVisitor {
            type Value = Value;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a string label, a finite number or null")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Value, E> {
                Ok(Value::Category(v.to_owned()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Value, E> {
                if v.is_finite() {
                    Ok(Value::Number(v))
                } else {
                    Err(E::custom("non-finite number"))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Value, E> {
                Ok(Value::Number(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Value, E> {
                Ok(Value::Number(v as f64))
            }

            fn visit_none<E: de::Error>(self) -> std::result::Result<Value, E> {
                Ok(Value::Missing)
            }

            fn visit_unit<E: de::Error>(self) -> std::result::Result<Value, E> {
                Ok(Value::Missing)
            }
        }

        d.deserialize_any(ValueVisitor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            check_row(&schema, row, i)?;
        }
        Ok(Self { schema, rows })
    }

    pub fn empty(schema: Schema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.schema.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &[Value] {
        &self.rows[index]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        self.schema.columns[col].kind
    }

    pub fn name(&self, col: usize) -> &str {
        &self.schema.columns[col].name
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = &Value> + '_ {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Non-missing numbers of a continuous column, in row order.
    pub fn numbers(&self, col: usize) -> Vec<f64> {
        self.column(col).filter_map(Value::as_number).collect()
    }

    /// Sorted distinct labels observed in a categorical column.
    pub fn labels(&self, col: usize) -> Vec<String> {
        let mut v: Vec<String> = self
            .column(col)
            .filter_map(|v| v.as_category().map(str::to_owned))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn non_missing_count(&self, col: usize) -> usize {
        self.column(col).filter(|v| !v.is_missing()).count()
    }

    pub fn into_rows(self) -> Vec<Vec<Value>> {
        self.rows
    }
}

fn check_row(schema: &Schema, row: &[Value], index: usize) -> Result<()> {
    if row.len() != schema.columns.len() {
        return Err(Error::RowWidth {
            row: index,
            found: row.len(),
            expected: schema.columns.len(),
        });
    }
    for (v, c) in row.iter().zip(&schema.columns) {
        if !v.fits(c.kind) {
            return Err(Error::KindMismatch {
                column: c.name.clone(),
                expected: c.kind.as_str(),
                actual: match v {
                    Value::Category(_) => "categorical",
                    _ => "a non-finite number",
                },
            });
        }
    }
    Ok(())
}

/// Reads a CSV file whose header names the schema's columns (in any order).
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses CSV text from any reader. Data rows are numbered from 1 in errors.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if position.insert(h, i).is_some() {
            return Err(Error::DuplicateHeader(h.to_owned()));
        }
    }
    for h in header.iter() {
        if !schema.columns.iter().any(|c| c.name == h) {
            return Err(Error::UnknownColumn(h.to_owned()));
        }
    }
    // schema column j is read from CSV field source[j]
    let source: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            position
                .get(c.name.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownColumn(c.name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        if record.len() != header.len() {
            return Err(Error::RowWidth {
                row: row_no,
                found: record.len(),
                expected: header.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.columns.len());
        for (col, &src) in schema.columns.iter().zip(&source) {
            let cell = &record[src];
            row.push(parse_cell(cell, col, row_no)?);
        }
        rows.push(row);
    }
    Ok(Dataset {
        schema: schema.clone(),
        rows,
    })
}

fn parse_cell(cell: &str, col: &ColumnSchema, row: usize) -> Result<Value> {
    if MISSING_MARKERS.contains(&cell) {
        return Ok(Value::Missing);
    }
    match col.kind {
        ColumnKind::Categorical => Ok(Value::Category(cell.to_owned())),
        ColumnKind::Continuous => match cell.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Value::Number(x)),
            _ => Err(Error::ParseNumber {
                row,
                column: col.name.clone(),
                cell: cell.to_owned(),
            }),
        },
    }
}

/// Writes the dataset as CSV with missing cells left empty.
pub fn write_csv<W: std::io::Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.columns().iter().map(|c| c.name.as_str()))?;
    for row in d.rows() {
        w.write_record(row.iter().map(|v| match v {
            Value::Missing => String::new(),
            other => other.to_string(),
        }))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Quantile bin edges per continuous column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    /// Requested bin count.
    pub bins: usize,
    /// Column name to strictly increasing edges. A value `v` falls in bin
    /// `#{e : e < v}`.
    pub edges: BTreeMap<String, Vec<f64>>,
}

impl DiscretizationMap {
    pub fn bin_of(&self, column: &str, value: f64) -> Option<usize> {
        self.edges.get(column).map(|e| bin_index(e, value))
    }
}

fn bin_index(edges: &[f64], value: f64) -> usize {
    edges.partition_point(|&e| e < value)
}

/// Order-statistic edges: the `ceil(k*n/b)`-th smallest value for `k = 1..b`,
/// exclusive of `b`, with duplicates merged.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins)
        .map(|k| {
            let rank = (k * n).div_ceil(bins).max(1);
            sorted[rank - 1]
        })
        .collect();
    edges.dedup();
    edges
}

/// Replaces every continuous column by categorical bin labels `"0".."b-1"`.
pub fn quantile_discretize(d: &Dataset, bins: usize) -> Result<(Dataset, DiscretizationMap)> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "bin count must be at least 2, got {bins}"
        )));
    }
    let mut map = DiscretizationMap {
        bins,
        edges: BTreeMap::new(),
    };
    let mut per_column: Vec<Option<Vec<f64>>> = vec![None; d.n_cols()];
    for (col, spec) in d.columns().iter().enumerate() {
        if spec.kind != ColumnKind::Continuous {
            continue;
        }
        let values = d.numbers(col);
        if values.len() < bins {
            return Err(Error::TooFewValues {
                column: spec.name.clone(),
                needed: bins,
                found: values.len(),
            });
        }
        let edges = quantile_edges(&values, bins);
        map.edges.insert(spec.name.clone(), edges.clone());
        per_column[col] = Some(edges);
    }

    let columns = d
        .columns()
        .iter()
        .map(|c| ColumnSchema::categorical(c.name.clone()))
        .collect();
    let rows = d
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&per_column)
                .map(|(v, edges)| match (v, edges) {
                    (Value::Number(x), Some(e)) => Value::Category(bin_index(e, *x).to_string()),
                    (other, _) => other.clone(),
                })
                .collect()
        })
        .collect();
    Ok((
        Dataset {
            schema: Schema { columns },
            rows,
        },
        map,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ColumnRange {
    /// Categorical column; ranges do not apply.
    NotApplicable,
    /// Continuous column with no observed values.
    Rangeless,
    Bounded { min: f64, max: f64 },
}

impl ColumnRange {
    pub fn width(&self) -> Option<f64> {
        match self {
            ColumnRange::Bounded { min, max } => Some(max - min),
            _ => None,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            ColumnRange::Bounded { min, max } => Some((*min, *max)),
            _ => None,
        }
    }

    /// `|a - b| / range`, defined as 0 on zero-width ranges.
    pub fn normalized_diff(&self, a: f64, b: f64) -> f64 {
        match self.width() {
            Some(w) if w > 0.0 => ((a - b).abs() / w).min(1.0),
            _ => 0.0,
        }
    }

    /// Min-max scaled value, 0 on zero-width ranges.
    pub fn scale(&self, x: f64) -> f64 {
        match self {
            ColumnRange::Bounded { min, max } if max > min => ((x - min) / (max - min)).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }
}

pub fn normalize_ranges(d: &Dataset) -> Vec<ColumnRange> {
    (0..d.n_cols())
        .map(|col| {
            if d.kind(col) == ColumnKind::Categorical {
                return ColumnRange::NotApplicable;
            }
            let mut it = d.column(col).filter_map(Value::as_number);
            match it.next() {
                None => ColumnRange::Rangeless,
                Some(first) => {
                    let (min, max) = it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x)));
                    ColumnRange::Bounded { min, max }
                }
            }
        })
        .collect()
}

pub fn select_rows(d: &Dataset, indices: &[usize]) -> Result<Dataset> {
    let rows = indices
        .iter()
        .map(|&i| {
            d.rows.get(i).cloned().ok_or(Error::RowOutOfRange {
                index: i,
                rows: d.n_rows(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        schema: d.schema.clone(),
        rows,
    })
}
