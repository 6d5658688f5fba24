//! Encoded data tables.
//!
//! Discrete columns are stored as 0-based symbol codes into the column's
//! alphabet; continuous columns keep their real values.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// A raw table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    /// Parses a textual cell: finite numbers become [`Cell::Number`], anything
    /// else is kept as trimmed text.
    pub fn parse(raw: &str) -> Cell {
        let s = raw.trim();
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Cell::Number(x),
            _ => Cell::Text(s.to_string()),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn same_label(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Labels in code order; code `j` stands for `alphabet[j]`.
    Discrete { alphabet: Vec<Cell> },
    Continuous { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
}

impl ColumnSchema {
    pub fn kind(&self) -> ColumnKind {
        match self.domain {
            Domain::Discrete { .. } => ColumnKind::Discrete,
            Domain::Continuous { .. } => ColumnKind::Continuous,
        }
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.domain {
            Domain::Discrete { alphabet } => Some(alphabet.len()),
            Domain::Continuous { .. } => None,
        }
    }

    /// Numeric reading of symbol `code`: the label itself when numeric,
    /// otherwise the 1-based code. Unseen codes map to `None`.
    pub fn symbol_value(&self, code: u32) -> Option<f64> {
        match &self.domain {
            Domain::Discrete { alphabet } => alphabet.get(code as usize).map(|c| match c {
                Cell::Number(x) => *x,
                Cell::Text(_) => f64::from(code) + 1.0,
            }),
            Domain::Continuous { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Discrete(Vec<u32>),
    Continuous(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Discrete(c) => c.len(),
            Column::Continuous(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Discrete(c) => Column::Discrete(rows.iter().map(|&r| c[r]).collect()),
            Column::Continuous(c) => Column::Continuous(rows.iter().map(|&r| c[r]).collect()),
        }
    }
}

/// Rows of raw cells with an optional header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<Cell>>,
}

/// An `n x p` table whose columns carry a [`ColumnSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    columns: Vec<Column>,
    schema: Vec<ColumnSchema>,
}

impl DataMatrix {
    /// Validates and assembles a table. Discrete codes must index into the
    /// alphabet, except that `alphabet.len()` itself is accepted as the
    /// "unseen symbol" marker produced by [`encode_with_schema`].
    pub fn new(columns: Vec<Column>, schema: Vec<ColumnSchema>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                found: columns.len(),
            });
        }
        let n = columns.first().map_or(0, Column::len);
        for (j, (col, sch)) in columns.iter().zip(&schema).enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            match (col, &sch.domain) {
                (Column::Discrete(codes), Domain::Discrete { alphabet }) => {
                    if codes.iter().any(|&c| c as usize > alphabet.len()) {
                        return Err(Error::SchemaMismatch {
                            column: j,
                            reason: "symbol code outside the alphabet".into(),
                        });
                    }
                }
                (Column::Continuous(x), Domain::Continuous { .. }) => {
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite);
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch {
                        column: j,
                        reason: "column storage disagrees with its schema kind".into(),
                    })
                }
            }
        }
        Ok(Self { n, columns, schema })
    }

    /// Discrete table from 0-based codes; labels are the numbers `1..=k`.
    pub fn from_codes(columns: Vec<Vec<u32>>) -> Result<Self> {
        let schema = columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = c.iter().copied().max().map_or(0, |m| m as usize + 1);
                ColumnSchema {
                    name: default_name(j),
                    domain: Domain::Discrete {
                        alphabet: (1..=k).map(|s| Cell::Number(s as f64)).collect(),
                    },
                }
            })
            .collect();
        Self::new(columns.into_iter().map(Column::Discrete).collect(), schema)
    }

    /// Continuous table; the observed range becomes the schema.
    pub fn from_continuous(columns: Vec<Vec<f64>>) -> Result<Self> {
        let schema = columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let (min, max) = range(c);
                ColumnSchema {
                    name: default_name(j),
                    domain: Domain::Continuous { min, max },
                }
            })
            .collect();
        Self::new(columns.into_iter().map(Column::Continuous).collect(), schema)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn with_names(mut self, names: &[String]) -> Self {
        for (s, name) in self.schema.iter_mut().zip(names) {
            s.name = name.clone();
        }
        self
    }

    pub fn codes(&self, j: usize) -> Result<&[u32]> {
        match &self.columns[j] {
            Column::Discrete(c) => Ok(c),
            Column::Continuous(_) => Err(Error::NotDiscrete(j)),
        }
    }

    pub fn values(&self, j: usize) -> Result<&[f64]> {
        match &self.columns[j] {
            Column::Continuous(c) => Ok(c),
            Column::Discrete(_) => Err(Error::NotContinuous(j)),
        }
    }

    pub fn all_discrete(&self) -> bool {
        self.columns.iter().all(|c| matches!(c, Column::Discrete(_)))
    }

    /// Numeric `n x p` matrix: continuous values as-is, discrete symbols via
    /// [`ColumnSchema::symbol_value`]. Unseen symbols become NaN.
    pub fn numeric_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.p());
        for (j, col) in self.columns.iter().enumerate() {
            match col {
                Column::Continuous(x) => {
                    for (i, &v) in x.iter().enumerate() {
                        m[(i, j)] = v;
                    }
                }
                Column::Discrete(codes) => {
                    for (i, &c) in codes.iter().enumerate() {
                        m[(i, j)] = self.schema[j].symbol_value(c).unwrap_or(f64::NAN);
                    }
                }
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            n: rows.len(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            schema: self.schema.clone(),
        }
    }

    /// Drops symbols that never occur and re-indexes codes, keeping the
    /// relative order of the surviving labels. Fails on unseen-symbol markers
    /// and on columns left with fewer than two symbols.
    pub fn pruned(&self) -> Result<DataMatrix> {
        let mut columns = Vec::with_capacity(self.p());
        let mut schema = Vec::with_capacity(self.p());
        for (j, (col, sch)) in self.columns.iter().zip(&self.schema).enumerate() {
            match (col, &sch.domain) {
                (Column::Discrete(codes), Domain::Discrete { alphabet }) => {
                    let mut seen = vec![false; alphabet.len()];
                    for &c in codes {
                        let slot = seen.get_mut(c as usize).ok_or_else(|| Error::SchemaMismatch {
                            column: j,
                            reason: "unseen symbol in training data".into(),
                        })?;
                        *slot = true;
                    }
                    let mut remap = vec![u32::MAX; alphabet.len()];
                    let mut kept = Vec::new();
                    for (s, _) in seen.iter().enumerate().filter(|(_, &b)| b) {
                        remap[s] = kept.len() as u32;
                        kept.push(alphabet[s].clone());
                    }
                    if kept.len() < 2 {
                        return Err(Error::DegenerateColumn(j));
                    }
                    columns.push(Column::Discrete(codes.iter().map(|&c| remap[c as usize]).collect()));
                    schema.push(ColumnSchema {
                        name: sch.name.clone(),
                        domain: Domain::Discrete { alphabet: kept },
                    });
                }
                _ => {
                    columns.push(col.clone());
                    schema.push(sch.clone());
                }
            }
        }
        Ok(DataMatrix {
            n: self.n,
            columns,
            schema,
        })
    }
}

pub(crate) fn default_name(j: usize) -> String {
    format!("x{}", j + 1)
}

fn range(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn distinct_count(values: &mut Vec<f64>) -> usize {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.len()
}

/// Decides a column's kind when no hint is given: any text makes it
/// discrete; a numeric column is continuous when it has more than
/// `min(120, n/3)` distinct values.
pub fn infer_kind(cells: &[&Cell]) -> ColumnKind {
    let mut numbers = Vec::with_capacity(cells.len());
    for c in cells {
        match c {
            Cell::Number(x) => numbers.push(*x),
            Cell::Text(_) => return ColumnKind::Discrete,
        }
    }
    let n = cells.len() as f64;
    let distinct = distinct_count(&mut numbers) as f64;
    if distinct > (n / 3.0).min(120.0) {
        ColumnKind::Continuous
    } else {
        ColumnKind::Discrete
    }
}

/// Encodes a raw table. Discrete columns get codes in first-appearance order;
/// continuous columns keep their values with the observed range recorded.
/// `hints[j]`, when present, overrides [`infer_kind`] for column `j`.
pub fn encode_columns(raw: &RawTable, hints: &[Option<ColumnKind>]) -> Result<DataMatrix> {
    let n = raw.rows.len();
    let p = raw.header.as_ref().map_or_else(|| raw.rows.first().map_or(0, Vec::len), Vec::len);
    for (row, cells) in raw.rows.iter().enumerate() {
        if cells.len() != p {
            return Err(Error::RaggedRow {
                row,
                expected: p,
                found: cells.len(),
            });
        }
    }
    if n < 2 || p < 2 {
        return Err(Error::TooSmall { rows: n, cols: p });
    }

    let mut columns = Vec::with_capacity(p);
    let mut schema = Vec::with_capacity(p);
    for j in 0..p {
        let cells: Vec<&Cell> = raw.rows.iter().map(|r| &r[j]).collect();
        let name = raw
            .header
            .as_ref()
            .map_or_else(|| default_name(j), |h| h[j].clone());
        let kind = hints
            .get(j)
            .copied()
            .flatten()
            .unwrap_or_else(|| infer_kind(&cells));
        match kind {
            ColumnKind::Discrete => {
                let mut alphabet: Vec<Cell> = Vec::new();
                let mut codes = Vec::with_capacity(n);
                for c in &cells {
                    let code = match alphabet.iter().position(|a| a.same_label(c)) {
                        Some(k) => k,
                        None => {
                            alphabet.push((*c).clone());
                            alphabet.len() - 1
                        }
                    };
                    codes.push(code as u32);
                }
                if alphabet.len() < 2 {
                    return Err(Error::DegenerateColumn(j));
                }
                columns.push(Column::Discrete(codes));
                schema.push(ColumnSchema {
                    name,
                    domain: Domain::Discrete { alphabet },
                });
            }
            ColumnKind::Continuous => {
                let values = cells
                    .iter()
                    .map(|c| {
                        c.as_number().ok_or_else(|| Error::SchemaMismatch {
                            column: j,
                            reason: "text in a continuous column".into(),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (min, max) = range(&values);
                if !(min < max) {
                    return Err(Error::DegenerateColumn(j));
                }
                columns.push(Column::Continuous(values));
                schema.push(ColumnSchema {
                    name,
                    domain: Domain::Continuous { min, max },
                });
            }
        }
    }
    DataMatrix::new(columns, schema)
}

/// Encodes rows against an existing schema (e.g. the one stored with a fitted
/// model). Labels missing from a discrete alphabet are encoded as the
/// unseen marker `alphabet.len()`; their count is returned.
pub fn encode_with_schema(rows: &[Vec<Cell>], schema: &[ColumnSchema]) -> Result<(DataMatrix, usize)> {
    let p = schema.len();
    for (row, cells) in rows.iter().enumerate() {
        if cells.len() != p {
            return Err(Error::RaggedRow {
                row,
                expected: p,
                found: cells.len(),
            });
        }
    }
    let mut unseen = 0;
    let mut columns = Vec::with_capacity(p);
    for (j, sch) in schema.iter().enumerate() {
        match &sch.domain {
            Domain::Discrete { alphabet } => {
                let codes = rows
                    .iter()
                    .map(|r| {
                        alphabet.iter().position(|a| a.same_label(&r[j])).unwrap_or_else(|| {
                            unseen += 1;
                            alphabet.len()
                        }) as u32
                    })
                    .collect();
                columns.push(Column::Discrete(codes));
            }
            Domain::Continuous { .. } => {
                let values = rows
                    .iter()
                    .map(|r| {
                        r[j].as_number().ok_or_else(|| Error::SchemaMismatch {
                            column: j,
                            reason: "text in a continuous column".into(),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                columns.push(Column::Continuous(values));
            }
        }
    }
    Ok((DataMatrix::new(columns, schema.to_vec())?, unseen))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text_rows(rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: None,
            rows: rows.iter().map(|r| r.iter().map(|s| Cell::parse(s)).collect()).collect(),
        }
    }

    #[test]
    fn first_appearance_encoding() {
        let raw = text_rows(&[&["a", "x"], &["b", "x"], &["a", "y"]]);
        let data = encode_columns(&raw, &[]).unwrap();
        assert_eq!(data.codes(0).unwrap(), &[0, 1, 0]);
        assert_eq!(data.codes(1).unwrap(), &[0, 0, 1]);
        assert_eq!(data.schema()[0].name, "x1");
    }

    #[test]
    fn identical_column_is_degenerate() {
        let raw = text_rows(&[&["a", "1"], &["b", "1"], &["a", "1"]]);
        assert_eq!(encode_columns(&raw, &[]), Err(Error::DegenerateColumn(1)));
    }

    #[test]
    fn ragged_rows_rejected() {
        let raw = text_rows(&[&["a", "1"], &["b"]]);
        assert!(matches!(encode_columns(&raw, &[]), Err(Error::RaggedRow { row: 1, .. })));
    }

    #[test]
    fn many_distinct_numbers_are_continuous() {
        let rows = (0..400)
            .map(|i| vec![Cell::Number(i as f64 * 0.37), Cell::Number((i % 5) as f64)])
            .collect();
        let data = encode_columns(&RawTable { header: None, rows }, &[]).unwrap();
        assert_eq!(data.schema()[0].kind(), ColumnKind::Continuous);
        assert_eq!(data.schema()[1].kind(), ColumnKind::Discrete);
    }

    #[test]
    fn heuristic_threshold_is_min_of_120_and_n_over_3() {
        // n = 30: threshold 10 distinct values.
        let cells: Vec<Cell> = (0..30).map(|i| Cell::Number((i % 10) as f64)).collect();
        let refs: Vec<&Cell> = cells.iter().collect();
        assert_eq!(infer_kind(&refs), ColumnKind::Discrete);
        let cells: Vec<Cell> = (0..30).map(|i| Cell::Number((i % 11) as f64)).collect();
        let refs: Vec<&Cell> = cells.iter().collect();
        assert_eq!(infer_kind(&refs), ColumnKind::Continuous);
    }

    #[test]
    fn schema_encoding_marks_unseen_labels() {
        let raw = text_rows(&[&["a", "x"], &["b", "x"], &["a", "y"]]);
        let data = encode_columns(&raw, &[]).unwrap();
        let test = text_rows(&[&["c", "x"], &["a", "z"]]);
        let (enc, unseen) = encode_with_schema(&test.rows, data.schema()).unwrap();
        assert_eq!(unseen, 2);
        assert_eq!(enc.codes(0).unwrap(), &[2, 0]);
        assert!(enc.pruned().is_err());
    }

    #[test]
    fn pruning_reindexes() {
        let data = DataMatrix::from_codes(vec![vec![0, 2, 2, 0], vec![1, 0, 1, 0]]).unwrap();
        let sub = data.select_rows(&[1, 2, 3]).pruned().unwrap();
        assert_eq!(sub.codes(0).unwrap(), &[1, 1, 0]);
        assert_eq!(sub.schema()[0].alphabet_size(), Some(2));
        assert_eq!(sub.schema()[0].symbol_value(1), Some(3.0));
    }
}
